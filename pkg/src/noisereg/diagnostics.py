"""Training-dynamics diagnostics: local intrinsic dimensionality, critical
sample ratio, and label precision.

LID is the maximum-likelihood estimate from k-nearest-neighbor distance
ratios, applied per point within a mini-batch of learned features. CSR is
the fraction of points whose predicted class flips somewhere inside an
L-infinity box, found by a bounded signed-gradient + random probe search
(a lower bound on the true fraction, by construction). Label precision
scores how well small training losses separate clean from corrupted labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InfiniteLidError,
    ParameterError,
    UndefinedMetricError,
)
from .nn import MlpModel, mlp_backward, mlp_forward
from .rng import RngStream


def hidden_features(model: MlpModel, x_batch: np.ndarray, layer: int | None = None) -> np.ndarray:
    """Deterministic embedding g(x): activations after the given hidden layer.

    layer 0 is the raw input; layer i (1-based) the i-th hidden activation.
    None selects the last hidden layer, i.e. the representation feeding the
    output layer. A model with no hidden layers falls back to the input.
    """
    if layer is None:
        layer = model.n_hidden
    if not 0 <= layer <= model.n_hidden:
        raise ParameterError(f"feature layer {layer} outside [0, {model.n_hidden}]")
    if layer == 0:
        return np.asarray(x_batch, dtype=np.float64)
    cache = mlp_forward(model, x_batch)
    return cache.hidden_outputs[layer - 1]


def lid_mle(x: np.ndarray, neighbors: np.ndarray, k: int) -> float:
    """MLE of local intrinsic dimensionality from the k nearest neighbors.

    Computes -((1/k) * sum_i log(r_i / r_max))^-1 over Euclidean distances,
    where r_max is the distance to the k-th nearest neighbor. Scale-free in
    the distances.
    """
    if k < 2:
        raise ParameterError("k must be >= 2")
    x = np.asarray(x, dtype=np.float64)
    neighbors = np.asarray(neighbors, dtype=np.float64)
    if neighbors.ndim != 2 or neighbors.shape[0] < k:
        raise ParameterError(f"need at least k={k} neighbors, got {neighbors.shape}")
    dists = np.sort(np.linalg.norm(neighbors - x, axis=1))[:k]
    if dists[0] == 0.0:
        raise DegenerateGeometryError("a neighbor coincides with the query point (zero distance)")
    log_ratio_sum = float(np.log(dists / dists[-1]).sum())
    if log_ratio_sum == 0.0:
        raise InfiniteLidError("all k nearest distances are equal; the estimate diverges")
    return -k / log_ratio_sum


@dataclass
class LidConfig:
    """Neighbor count, batch size, and feature layer for batched LID."""

    k: int = 20
    batch_size: int = 128
    feature_layer: int | None = None

    def __post_init__(self):
        if not 2 <= self.k < self.batch_size:
            raise ParameterError(f"need 2 <= k < batch_size, got k={self.k}, batch_size={self.batch_size}")


@dataclass
class LidEstimate:
    """Per-point LID values (NaN where skipped), their mean, and the skip count."""

    per_point: np.ndarray
    mean: float
    skipped: int = 0


def _pairwise_distances(points: np.ndarray, block: int = 256) -> np.ndarray:
    # Exact differences so duplicate rows yield exactly zero distance.
    n = points.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = points[start:stop, None, :] - points[None, :, :]
        out[start:stop] = np.sqrt((diff * diff).sum(axis=-1))
    return out


def lid_batch(model: MlpModel, x_batch: np.ndarray, cfg: LidConfig) -> LidEstimate:
    """Mini-batch LID: embed the batch, estimate per point against the rest.

    Each point's own row is excluded from its neighbor set. Points whose
    nearest in-batch neighbor coincides with them (or whose k distances are
    all equal) are skipped and counted.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    n = x_batch.shape[0]
    if n <= cfg.k:
        raise ParameterError(f"batch of {n} points cannot support k={cfg.k}")
    feats = hidden_features(model, x_batch, cfg.feature_layer)
    dists = _pairwise_distances(feats)
    np.fill_diagonal(dists, np.inf)
    nearest = np.sort(dists, axis=1)[:, : cfg.k]

    per_point = np.full(n, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio_sums = np.log(nearest / nearest[:, -1:]).sum(axis=1)
    valid = (nearest[:, 0] > 0.0) & (log_ratio_sums < 0.0)
    per_point[valid] = -cfg.k / log_ratio_sums[valid]
    skipped = int(n - valid.sum())
    mean = float(per_point[valid].mean()) if valid.any() else float("nan")
    return LidEstimate(per_point=per_point, mean=mean, skipped=skipped)


@dataclass
class CsrConfig:
    """L-infinity probe box radius, probe budget, and signed-gradient step size."""

    radius: float
    probes: int = 10
    step: float | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError("radius must be > 0")
        if self.probes < 1:
            raise ParameterError("probes must be >= 1")
        if self.step is None:
            self.step = self.radius / 5.0


def critical_sample_ratio(
    model: MlpModel, x_batch: np.ndarray, cfg: CsrConfig, rng: RngStream
) -> float:
    """Fraction of points whose argmax prediction flips inside the probe box.

    Probes split between an iterative signed-gradient descent on the margin
    (top logit minus runner-up), clipped to the box, and uniform random
    draws scaled to the box. A found flip certifies the point as critical;
    the returned ratio is therefore a lower bound.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    n, dim = x_batch.shape
    base = np.argmax(mlp_forward(model, x_batch).logits, axis=1)
    critical = np.zeros(n, dtype=bool)
    rows = np.arange(n)

    n_grad = (cfg.probes + 1) // 2
    n_rand = cfg.probes - n_grad

    x_hat = x_batch.copy()
    lo, hi = x_batch - cfg.radius, x_batch + cfg.radius
    for _ in range(n_grad):
        cache = mlp_forward(model, x_hat)
        logits = cache.logits
        masked = logits.copy()
        masked[rows, base] = -np.inf
        runner_up = np.argmax(masked, axis=1)
        seed = np.zeros_like(logits)
        seed[rows, base] = 1.0
        seed[rows, runner_up] -= 1.0
        grad = mlp_backward(model, cache, seed).d_input
        x_hat = np.clip(x_hat - cfg.step * np.sign(grad), lo, hi)
        critical |= np.argmax(mlp_forward(model, x_hat).logits, axis=1) != base

    for _ in range(n_rand):
        probe = x_batch + cfg.radius * rng.uniform(-1.0, 1.0, size=(n, dim))
        critical |= np.argmax(mlp_forward(model, probe).logits, axis=1) != base

    return float(critical.mean())


def label_precision(train_losses: np.ndarray, clean_mask: np.ndarray, eta: float) -> float:
    """Clean fraction among the floor(N*(1-eta)) smallest-loss examples.

    Ties are broken by example index. An empty selection has no defined
    value and raises.
    """
    if not 0.0 <= eta < 1.0:
        raise ParameterError(f"eta must be in [0, 1), got {eta}")
    losses = np.asarray(train_losses, dtype=np.float64)
    if not np.isfinite(losses).all():
        raise ParameterError("losses must be finite")
    clean_mask = np.asarray(clean_mask, dtype=bool)
    if clean_mask.shape != losses.shape:
        raise ParameterError("losses and clean_mask must have equal length")
    n_sel = int(np.floor(len(losses) * (1.0 - eta)))
    if n_sel == 0:
        raise UndefinedMetricError("selection of floor(N*(1-eta)) examples is empty")
    selected = np.argsort(losses, kind="stable")[:n_sel]
    return float(clean_mask[selected].mean())
