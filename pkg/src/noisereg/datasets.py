"""Labeled datasets: synthetic generators, IDX loading, file container, splits.

A LabeledDataset always carries both clean and noisy labels; before any
corruption the two coincide and the clean mask is all-true. The on-disk
container is a little-endian binary format that round-trips float64
features and int64 labels bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, GenerationError, LabelError, ParameterError
from .rng import RngStream

DATASET_MAGIC = b"NRDS"
DATASET_VERSION = 1

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Features with clean labels, noisy labels, and the clean mask."""

    features: np.ndarray
    clean_labels: np.ndarray
    noisy_labels: np.ndarray
    num_classes: int
    clean_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.clean_labels = np.asarray(self.clean_labels, dtype=np.int64)
        self.noisy_labels = np.asarray(self.noisy_labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise DimensionError("features must be a 2-D array")
        if self.clean_labels.shape != (n,) or self.noisy_labels.shape != (n,):
            raise DimensionError("label arrays must have one entry per feature row")
        for name, labels in (("clean", self.clean_labels), ("noisy", self.noisy_labels)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise LabelError(f"{name} labels fall outside [0, {self.num_classes})")
        self.clean_mask = self.noisy_labels == self.clean_labels

    @classmethod
    def clean(cls, features, labels, num_classes) -> "LabeledDataset":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(features, labels, labels.copy(), num_classes)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def has_noise(self) -> bool:
        return not bool(self.clean_mask.all())

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(
            self.features[idx], self.clean_labels[idx], self.noisy_labels[idx], self.num_classes
        )


def make_blobs(
    k: int, d: int, n: int, cluster_sep: float, rng: RngStream, max_attempts: int = 1000
) -> LabeledDataset:
    """Balanced Gaussian clusters with unit within-cluster sd.

    Centers are rejection-sampled from a box until all pairwise distances
    reach cluster_sep; if a center cannot be placed within max_attempts
    draws the packing is declared infeasible.
    """
    if k < 2 or d < 2 or n < k:
        raise ParameterError(f"need k >= 2, d >= 2, n >= k; got k={k}, d={d}, n={n}")
    if cluster_sep < 0:
        raise ParameterError("cluster_sep must be >= 0")

    half_side = cluster_sep * max(2.0, k ** (1.0 / d))
    centers = np.empty((k, d))
    for c in range(k):
        for attempt in range(max_attempts):
            cand = rng.uniform(-half_side, half_side, size=d)
            if c == 0 or np.linalg.norm(centers[:c] - cand, axis=1).min() >= cluster_sep:
                centers[c] = cand
                break
        else:
            raise GenerationError(
                f"could not place {k} centers at separation {cluster_sep} in {d} dims"
            )

    counts = np.full(k, n // k)
    counts[: n % k] += 1
    labels = np.repeat(np.arange(k), counts)
    points = centers[labels] + rng.normal(size=(n, d))
    order = rng.permutation(n)
    return LabeledDataset.clean(points[order], labels[order], k)


def make_two_moons(n: int, noise_sd: float, rng: RngStream) -> LabeledDataset:
    """Two interleaved unit half-circles in the plane, balanced classes."""
    if n % 2 != 0:
        raise ParameterError("n must be even")
    if noise_sd < 0:
        raise ParameterError("noise_sd must be >= 0")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    points = np.vstack([upper, lower])
    labels = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    if noise_sd > 0:
        points = points + noise_sd * rng.normal(size=points.shape)
    order = rng.permutation(n)
    return LabeledDataset.clean(points[order], labels[order], 2)


def _read_exact(fh, count, path, what):
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(f"{path}: truncated while reading {what} at offset {fh.tell() - len(data)}")
    return data


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label file pair as a clean dataset.

    Pixels are scaled to [0, 1] and flattened row-major. The two files
    must agree on the item count.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, images_path, "magic"))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"{images_path}: bad magic 0x{magic:08x} at offset 0 (want 0x{IDX_IMAGES_MAGIC:08x})")
        n, rows, cols = struct.unpack(">III", _read_exact(fh, 12, images_path, "dimensions"))
        pixels = np.frombuffer(_read_exact(fh, n * rows * cols, images_path, "pixels"), dtype=np.uint8)
        if fh.read(1):
            raise FormatError(f"{images_path}: trailing bytes after {n} images")
    with open(labels_path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, labels_path, "magic"))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"{labels_path}: bad magic 0x{magic:08x} at offset 0 (want 0x{IDX_LABELS_MAGIC:08x})")
        (n_labels,) = struct.unpack(">I", _read_exact(fh, 4, labels_path, "count"))
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path, "labels"), dtype=np.uint8)
    if n_labels != n:
        raise FormatError(f"{labels_path}: {n_labels} labels for {n} images")
    features = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    return LabeledDataset.clean(features, labels.astype(np.int64), int(labels.max()) + 1 if n else 1)


def save_dataset(ds: LabeledDataset, path) -> None:
    """Write the versioned binary container; round-trips bit-exactly."""
    has_noisy = ds.has_noise
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<IQQIB", DATASET_VERSION, len(ds), ds.dim, ds.num_classes, int(has_noisy)))
        fh.write(np.ascontiguousarray(ds.features).tobytes())
        fh.write(np.ascontiguousarray(ds.clean_labels).tobytes())
        if has_noisy:
            fh.write(np.ascontiguousarray(ds.noisy_labels).tobytes())


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path, "magic") != DATASET_MAGIC:
            raise FormatError(f"{path}: bad magic at offset 0 (want {DATASET_MAGIC!r})")
        version, n, dim, k, has_noisy = struct.unpack("<IQQIB", _read_exact(fh, 25, path, "header"))
        if version != DATASET_VERSION:
            raise FormatError(f"{path}: unsupported container version {version}")
        features = np.frombuffer(_read_exact(fh, n * dim * 8, path, "features"), dtype=np.float64)
        clean = np.frombuffer(_read_exact(fh, n * 8, path, "clean labels"), dtype=np.int64)
        if has_noisy:
            noisy = np.frombuffer(_read_exact(fh, n * 8, path, "noisy labels"), dtype=np.int64)
        else:
            noisy = clean.copy()
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after payload")
    return LabeledDataset(features.reshape(n, dim).copy(), clean.copy(), noisy.copy(), k)


def train_test_split(ds: LabeledDataset, test_fraction: float, rng: RngStream):
    """Disjoint stratified split by clean class; returns (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError("test_fraction must be in (0, 1)")
    test_idx = []
    for c in range(ds.num_classes):
        members = np.nonzero(ds.clean_labels == c)[0]
        members = members[rng.permutation(len(members))]
        n_test = int(round(len(members) * test_fraction))
        test_idx.append(members[:n_test])
    test_idx = np.sort(np.concatenate(test_idx)) if test_idx else np.array([], dtype=np.int64)
    mask = np.zeros(len(ds), dtype=bool)
    mask[test_idx] = True
    return ds.subset(~mask), ds.subset(mask)
