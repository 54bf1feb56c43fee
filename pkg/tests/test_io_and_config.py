"""Metrics CSV, checkpoint container, and config parsing."""

import numpy as np
import pytest

from noisereg import (
    ConfigError,
    FormatError,
    METRICS_HEADER,
    MetricsRow,
    MlpModel,
    RngStream,
    load_checkpoint,
    parse_config,
    read_metrics_csv,
    save_checkpoint,
    write_metrics_csv,
)


def random_rows(n, seed=0):
    rng = RngStream(seed)
    rows = []
    for i in range(n):
        vals = rng.normal(size=10)
        rows.append(MetricsRow(i + 1, *[float(v) for v in vals]))
    return rows


class TestMetricsCsv:
    def test_empty_list_gives_header_only(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics_csv([], path)
        assert path.read_text() == METRICS_HEADER + "\n"
        assert read_metrics_csv(path) == []

    def test_roundtrip_is_exact(self, tmp_path):
        rows = random_rows(3, seed=1)
        path = tmp_path / "m.csv"
        write_metrics_csv(rows, path)
        assert read_metrics_csv(path) == rows

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics_csv(random_rows(2), path)
        lines = path.read_text().splitlines()
        lines[2] = ",".join(lines[2].split(",")[:-1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match=":3"):
            read_metrics_csv(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("epoch,foo\n")
        with pytest.raises(FormatError, match="header"):
            read_metrics_csv(path)

    def test_garbage_value_names_line(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics_csv(random_rows(1), path)
        path.write_text(path.read_text() + "2,x,0,0,0,0,0,0,0,0,0\n")
        with pytest.raises(FormatError, match=":3"):
            read_metrics_csv(path)

    def test_prefix_of_truncated_file_parses(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics_csv(random_rows(5), path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:4]) + "\n")
        assert len(read_metrics_csv(path)) == 3

    def test_nonincreasing_epochs_rejected(self, tmp_path):
        rows = random_rows(2)
        rows[1].epoch = rows[0].epoch
        with pytest.raises(FormatError):
            write_metrics_csv(rows, tmp_path / "m.csv")


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = MlpModel.init([5, 16, 8, 3], RngStream(2), hidden_activation="tanh", dropout_rate=0.25)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.layer_dims == model.layer_dims
        assert back.hidden_activation == "tanh"
        assert back.dropout_rate == 0.25
        for a, b in zip(model.weights + model.biases, back.weights + back.biases):
            assert a.tobytes() == b.tobytes()

    def test_double_roundtrip_identical_bytes(self, tmp_path):
        model = MlpModel.init([4, 7, 2], RngStream(3))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(model, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(FormatError, match="magic"):
            load_checkpoint(path)

    def test_truncation(self, tmp_path):
        model = MlpModel.init([4, 7, 2], RngStream(4))
        path = tmp_path / "x.ckpt"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(FormatError, match="truncated"):
            load_checkpoint(path)


MINIMAL = """
# blobs experiment
dataset = blobs
noise = uniform
eta = 0.6
hidden_dims = 64,64
lambda_max = 25.0
gaussian_sigma = 1.0
seed = 3
"""


class TestConfigParsing:
    def test_minimal_config(self):
        cfg = parse_config(MINIMAL)
        assert cfg.dataset.kind == "blobs"
        assert cfg.noise.kind == "uniform"
        assert cfg.noise.eta == 0.6
        assert cfg.hidden_dims == [64, 64]
        assert cfg.regularizer.lambda_max == 25.0
        assert cfg.perturb.gaussian_sigma == 1.0
        assert cfg.seed == 3
        # defaults fill the rest
        assert cfg.epochs == 150
        assert cfg.momentum == 0.9
        assert cfg.regularizer.prediction_space == "probabilities"

    def test_unknown_key_is_fatal(self):
        with pytest.raises(ConfigError, match="lerning_rate"):
            parse_config("dataset = blobs\nlerning_rate = 0.1\n")

    def test_duplicate_key_is_fatal(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("dataset = blobs\ndataset = two_moons\n")

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match="epochs"):
            parse_config("dataset = blobs\nepochs = soon\n")

    def test_invalid_subconfig_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("dataset = blobs\nmomentum = 1.5\n")
        with pytest.raises(ConfigError):
            parse_config("dataset = nope\n")

    def test_idx_requires_paths(self):
        with pytest.raises(ConfigError, match="idx"):
            parse_config("dataset = idx\n")

    def test_exact_regularizer_key_names(self):
        cfg = parse_config(
            "dataset = blobs\nlambda_max = 2.0\nrampup_epochs = 7\n"
            "gaussian_sigma = 0.3\ndropout_on = true\nprediction_space = logits\n"
        )
        assert cfg.regularizer.lambda_max == 2.0
        assert cfg.regularizer.rampup_epochs == 7
        assert cfg.perturb.gaussian_sigma == 0.3
        assert cfg.perturb.dropout_on is True
        assert cfg.regularizer.prediction_space == "logits"

    def test_malformed_line_reports_position(self):
        with pytest.raises(ConfigError, match=":2"):
            parse_config("dataset = blobs\nthis is not a key value pair\n")
