"""Report rendering details: NaN-tolerant summaries and run labeling."""

import math

import numpy as np

from noisereg import MetricsRow, write_metrics_csv
from noisereg.report import render_report, write_summary_csv


def row(epoch, test_acc=0.9, lid=5.0, **overrides):
    values = dict(
        epoch=epoch, lr=0.1, lambda_eff=1.0, train_loss=0.5, train_acc_vs_noisy=0.4,
        train_acc_vs_clean=0.8, test_acc=test_acc, label_precision=0.7, lid_mean=lid,
        csr=0.2, rv_hat_mean=0.01,
    )
    values.update(overrides)
    return MetricsRow(**values)


def test_summary_ignores_nan_marker_rows(tmp_path):
    nan = float("nan")
    rows = [
        row(1, test_acc=0.8, lid=6.0),
        row(2, test_acc=0.95, lid=4.0),
        row(3, test_acc=0.9, lid=5.0),
        MetricsRow(4, 0.1, 1.0, nan, nan, nan, nan, nan, nan, nan, nan),
    ]
    out = write_summary_csv([("run", rows)], tmp_path / "summary.csv")
    header, line = out.read_text().splitlines()
    fields = dict(zip(header.split(","), line.split(",")))
    assert float(fields["final_test_acc"]) == 0.9
    assert float(fields["peak_test_acc"]) == 0.95
    assert float(fields["min_lid_mean"]) == 4.0
    assert fields["final_epoch"] == "4"


def test_render_report_disambiguates_same_stem(tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        write_metrics_csv([row(1), row(2)], tmp_path / sub / "metrics.csv")
    out_dir = tmp_path / "figs"
    written = render_report(
        [tmp_path / "a" / "metrics.csv", tmp_path / "b" / "metrics.csv"], out_dir
    )
    assert all(p.exists() for p in written)
    summary = (out_dir / "summary.csv").read_text()
    assert "a/metrics" in summary and "b/metrics" in summary


def test_render_report_handles_nan_lid(tmp_path):
    rows = [row(1, lid=float("nan")), row(2, lid=float("nan"))]
    write_metrics_csv(rows, tmp_path / "m.csv")
    written = render_report([tmp_path / "m.csv"], tmp_path / "figs")
    assert (tmp_path / "figs" / "lid.png").exists()
    summary = (tmp_path / "figs" / "summary.csv").read_text().splitlines()[1]
    assert "nan" in summary
