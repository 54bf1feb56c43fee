"""Class-conditional label corruption via row-stochastic transition matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .errors import DimensionError, ParameterError
from .rng import RngStream

ROW_SUM_TOL = 1e-12


@dataclass
class TransitionMatrix:
    """K x K matrix t with t[i, j] = p(noisy = j | clean = i)."""

    k: int
    t: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.t.shape != (self.k, self.k):
            raise DimensionError(f"transition matrix shape {self.t.shape} != ({self.k}, {self.k})")
        if (self.t < 0).any() or (self.t > 1).any():
            raise ParameterError("transition probabilities must lie in [0, 1]")
        row_sums = self.t.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > ROW_SUM_TOL:
            raise ParameterError(f"rows must sum to 1 within {ROW_SUM_TOL}; got {row_sums}")


def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must be in [0, 1], got {eta}")
    return float(eta)


def uniform_noise_matrix(k: int, eta: float, allow_self_flip: bool = False) -> TransitionMatrix:
    """Uniform (symmetric) noise at rate eta.

    By default a corrupted label is drawn uniformly over the other K-1
    classes, so eta is the exact expected flip fraction. With
    allow_self_flip the replacement is uniform over all K classes and the
    realized flip rate is eta * (K-1)/K.
    """
    if k < 2:
        raise ParameterError("k must be >= 2")
    eta = _check_eta(eta)
    if allow_self_flip:
        t = (1.0 - eta) * np.eye(k) + eta / k * np.ones((k, k))
    else:
        t = (1.0 - eta) * np.eye(k) + eta / (k - 1) * (np.ones((k, k)) - np.eye(k))
    return TransitionMatrix(k, t)


def cifar10_asymmetric_matrix(eta: float) -> TransitionMatrix:
    """Ten-class asymmetric flips between semantically paired classes.

    truck -> automobile, bird -> airplane, deer -> horse, cat <-> dog,
    each with probability eta; every other class keeps its label.
    """
    eta = _check_eta(eta)
    t = np.eye(10)
    for src, dst in ((2, 0), (3, 5), (4, 7), (5, 3), (9, 1)):
        t[src, src] = 1.0 - eta
        t[src, dst] = eta
    return TransitionMatrix(10, t)


def circular_noise_matrix(k: int, eta: float) -> TransitionMatrix:
    """Each class flips to the next with probability eta, wrapping at the end."""
    if k < 2:
        raise ParameterError("k must be >= 2")
    eta = _check_eta(eta)
    t = (1.0 - eta) * np.eye(k)
    for i in range(k):
        t[i, (i + 1) % k] += eta
    return TransitionMatrix(k, t)


@dataclass
class NoiseModel:
    """Named corruption model: uniform, asym10, circular, an explicit matrix, or none."""

    kind: str = "none"
    eta: float = 0.0
    matrix: np.ndarray | None = None
    allow_self_flip: bool = False

    KINDS = ("none", "uniform", "asym10", "circular", "matrix")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"noise kind must be one of {self.KINDS}, got {self.kind!r}")
        if self.kind == "matrix" and self.matrix is None:
            raise ParameterError("noise kind 'matrix' requires an explicit matrix")
        if self.kind != "matrix":
            _check_eta(self.eta)

    def transition_matrix(self, k: int) -> TransitionMatrix:
        if self.kind == "none":
            return TransitionMatrix(k, np.eye(k))
        if self.kind == "uniform":
            return uniform_noise_matrix(k, self.eta, self.allow_self_flip)
        if self.kind == "asym10":
            if k != 10:
                raise DimensionError(f"asym10 noise needs 10 classes, dataset has {k}")
            return cifar10_asymmetric_matrix(self.eta)
        if self.kind == "circular":
            return circular_noise_matrix(k, self.eta)
        return TransitionMatrix(k, self.matrix)


def corrupt(clean: LabeledDataset, t: TransitionMatrix, rng: RngStream) -> LabeledDataset:
    """Draw each noisy label from its clean label's transition row.

    Features are shared untouched; only the noisy labels (and hence the
    clean mask) change. Deterministic given the rng stream.
    """
    if t.k != clean.num_classes:
        raise DimensionError(f"transition matrix has {t.k} classes, dataset has {clean.num_classes}")
    cdf = np.cumsum(t.t, axis=1)
    cdf[:, -1] = 1.0  # guard against cumulative rounding
    u = rng.random(len(clean))
    noisy = (u[:, None] >= cdf[clean.clean_labels]).sum(axis=1)
    noisy = np.minimum(noisy, t.k - 1).astype(np.int64)
    return LabeledDataset(clean.features, clean.clean_labels, noisy, clean.num_classes)
