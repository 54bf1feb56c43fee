"""Synthetic generators, the IDX loader, the dataset container, and splits."""

import struct

import numpy as np
import pytest

from noisereg import (
    FormatError,
    GenerationError,
    MlpModel,
    OptimState,
    ParameterError,
    RngStream,
    load_dataset,
    load_idx,
    make_blobs,
    make_two_moons,
    mlp_backward,
    mlp_forward,
    save_dataset,
    sgd_momentum_step,
    softmax_cross_entropy,
    train_test_split,
)


def quick_train(model, features, labels, epochs=40, lr=0.1, batch=128, seed=99):
    """Minimal cross-entropy training loop used as a separability oracle."""
    rng = RngStream(seed)
    state = OptimState.for_model(model, momentum=0.9)
    n = len(labels)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            idx = perm[start : start + batch]
            cache = mlp_forward(model, features[idx])
            _, d_logits = softmax_cross_entropy(cache.logits, labels[idx])
            sgd_momentum_step(model, mlp_backward(model, cache, d_logits), state, lr)
    return model


def accuracy(model, features, labels):
    return float((np.argmax(mlp_forward(model, features).logits, axis=1) == labels).mean())


class TestMakeBlobs:
    def test_linear_classifier_separates_clean_blobs(self):
        ds = make_blobs(4, 20, 1500, cluster_sep=10.0, rng=RngStream(1))
        train, test = train_test_split(ds, 0.2, RngStream(2))
        model = MlpModel.init([20, 4], RngStream(3))
        quick_train(model, train.features, train.clean_labels, epochs=20)
        assert accuracy(model, test.features, test.clean_labels) >= 0.99

    def test_one_point_per_class(self):
        ds = make_blobs(5, 3, 5, cluster_sep=4.0, rng=RngStream(4))
        assert sorted(ds.clean_labels.tolist()) == [0, 1, 2, 3, 4]

    def test_balanced_counts_within_one(self):
        ds = make_blobs(3, 2, 100, cluster_sep=5.0, rng=RngStream(5))
        counts = np.bincount(ds.clean_labels)
        assert counts.max() - counts.min() <= 1

    def test_deterministic(self):
        a = make_blobs(4, 6, 200, 8.0, RngStream(6))
        b = make_blobs(4, 6, 200, 8.0, RngStream(6))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.clean_labels, b.clean_labels)

    def test_centers_respect_separation(self):
        sep = 9.0
        ds = make_blobs(6, 10, 600, sep, RngStream(7))
        centers = np.array([ds.features[ds.clean_labels == c].mean(axis=0) for c in range(6)])
        for i in range(6):
            for j in range(i + 1, 6):
                # Empirical centers wobble by ~1/sqrt(100); generous slack.
                assert np.linalg.norm(centers[i] - centers[j]) > sep - 1.0

    def test_infeasible_packing_raises(self):
        with pytest.raises(GenerationError):
            make_blobs(8, 2, 16, 5.0, RngStream(0), max_attempts=1)

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            make_blobs(1, 5, 10, 1.0, RngStream(0))
        with pytest.raises(ParameterError):
            make_blobs(3, 5, 2, 1.0, RngStream(0))


class TestMakeTwoMoons:
    def test_noiseless_points_sit_on_unit_circles(self):
        ds = make_two_moons(400, 0.0, RngStream(8))
        upper = ds.features[ds.clean_labels == 0]
        lower = ds.features[ds.clean_labels == 1]
        np.testing.assert_allclose(np.linalg.norm(upper, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(
            np.linalg.norm(lower - np.array([1.0, 0.5]), axis=1), 1.0, atol=1e-12
        )

    def test_classes_exactly_balanced(self):
        ds = make_two_moons(500, 0.1, RngStream(9))
        counts = np.bincount(ds.clean_labels)
        assert counts[0] == counts[1]

    def test_odd_n_rejected(self):
        with pytest.raises(ParameterError):
            make_two_moons(501, 0.1, RngStream(0))

    def test_mlp_reaches_97_percent(self):
        ds = make_two_moons(2000, 0.1, RngStream(10))
        train, test = train_test_split(ds, 0.2, RngStream(11))
        model = MlpModel.init([2, 32, 2], RngStream(12), hidden_activation="tanh")
        quick_train(model, train.features, train.clean_labels, epochs=60)
        assert accuracy(model, test.features, test.clean_labels) >= 0.97


def idx_image_bytes(images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", 0x00000803, n, rows, cols) + images.tobytes()


def idx_label_bytes(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 0x00000801, len(labels)) + labels.tobytes()


class TestLoadIdx:
    def test_wellformed_fixture(self, tmp_path):
        images = RngStream(13).gen.integers(0, 256, size=(4, 28, 28))
        labels = [3, 1, 4, 1]
        (tmp_path / "img").write_bytes(idx_image_bytes(images))
        (tmp_path / "lab").write_bytes(idx_label_bytes(labels))
        ds = load_idx(tmp_path / "img", tmp_path / "lab")
        assert len(ds) == 4
        assert ds.dim == 28 * 28
        assert ds.features.max() <= 1.0 and ds.features.min() >= 0.0
        np.testing.assert_array_equal(ds.clean_labels, labels)
        np.testing.assert_allclose(
            ds.features[0], images[0].reshape(-1).astype(np.float64) / 255.0, atol=0
        )

    def test_wrong_magic(self, tmp_path):
        (tmp_path / "img").write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + bytes(4))
        (tmp_path / "lab").write_bytes(idx_label_bytes([0]))
        with pytest.raises(FormatError, match="magic"):
            load_idx(tmp_path / "img", tmp_path / "lab")

    def test_count_mismatch(self, tmp_path):
        (tmp_path / "img").write_bytes(idx_image_bytes(np.zeros((3, 2, 2), dtype=np.uint8)))
        (tmp_path / "lab").write_bytes(idx_label_bytes([0, 1]))
        with pytest.raises(FormatError, match="labels"):
            load_idx(tmp_path / "img", tmp_path / "lab")

    def test_truncated_pixels(self, tmp_path):
        payload = idx_image_bytes(np.zeros((2, 4, 4), dtype=np.uint8))
        (tmp_path / "img").write_bytes(payload[:-5])
        (tmp_path / "lab").write_bytes(idx_label_bytes([0, 1]))
        with pytest.raises(FormatError, match="offset"):
            load_idx(tmp_path / "img", tmp_path / "lab")


class TestDatasetContainer:
    def test_roundtrip_clean(self, tmp_path):
        ds = make_blobs(3, 4, 50, 5.0, RngStream(14))
        save_dataset(ds, tmp_path / "d.nrds")
        back = load_dataset(tmp_path / "d.nrds")
        assert back.features.tobytes() == ds.features.tobytes()
        np.testing.assert_array_equal(back.clean_labels, ds.clean_labels)
        assert not back.has_noise
        assert back.num_classes == 3

    def test_roundtrip_with_noise(self, tmp_path):
        from noisereg import corrupt, uniform_noise_matrix

        ds = corrupt(make_blobs(3, 4, 50, 5.0, RngStream(15)), uniform_noise_matrix(3, 0.5), RngStream(16))
        save_dataset(ds, tmp_path / "d.nrds")
        back = load_dataset(tmp_path / "d.nrds")
        np.testing.assert_array_equal(back.noisy_labels, ds.noisy_labels)
        np.testing.assert_array_equal(back.clean_mask, ds.clean_mask)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "d.nrds").write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(FormatError, match="magic"):
            load_dataset(tmp_path / "d.nrds")

    def test_truncation(self, tmp_path):
        ds = make_blobs(3, 4, 50, 5.0, RngStream(17))
        save_dataset(ds, tmp_path / "d.nrds")
        payload = (tmp_path / "d.nrds").read_bytes()
        (tmp_path / "d.nrds").write_bytes(payload[:-3])
        with pytest.raises(FormatError, match="truncated"):
            load_dataset(tmp_path / "d.nrds")


class TestTrainTestSplit:
    def test_disjoint_and_stratified(self):
        ds = make_blobs(4, 5, 1000, 6.0, RngStream(18))
        train, test = train_test_split(ds, 0.2, RngStream(19))
        assert len(train) + len(test) == 1000
        for c in range(4):
            n_test = int((test.clean_labels == c).sum())
            n_total = int((ds.clean_labels == c).sum())
            assert abs(n_test - 0.2 * n_total) <= 1

    def test_fraction_validated(self):
        ds = make_blobs(2, 2, 10, 3.0, RngStream(20))
        with pytest.raises(ParameterError):
            train_test_split(ds, 0.0, RngStream(0))
