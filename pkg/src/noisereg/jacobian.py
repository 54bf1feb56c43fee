"""Exact and Monte-Carlo analysis of the network's input-output Jacobian.

Exact Jacobians come from one reverse pass per output dimension. The
Monte-Carlo estimator evaluates paired Gaussian perturbations, dividing the
squared prediction difference by 2*sigma^2; for linear maps its mean is
exactly the squared Frobenius norm, and for smooth networks the curvature
bias vanishes as sigma shrinks. The quadratic-form variance formula and the
explicit sample bound quantify how reliable that estimator is.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .nn import MlpModel, mlp_backward, mlp_forward
from .regularizer import _d_logits_from_d_predictions, predictions_from_logits
from .rng import RngStream


class AsymmetricGramWarning(UserWarning):
    """The supplied Gram matrix was not symmetric and has been symmetrized."""


@dataclass
class JacobianReport:
    """Exact Jacobian of one input point, with its Gram matrix and norm.

    relu_zero_preacts counts hidden relu units that sat exactly at zero
    pre-activation; those units used the subgradient convention
    relu'(0) = 0.
    """

    jacobian: np.ndarray
    frob_sq: float
    gram: np.ndarray
    relu_zero_preacts: int = 0


def batch_jacobians(model: MlpModel, x_set: np.ndarray, prediction_space: str = "logits"):
    """Jacobians for every row of x_set, shape (n, K, D), plus the relu-kink count.

    Uses one batched reverse pass per output dimension, with the model in
    deterministic mode (no input noise, dropout off).
    """
    x_set = np.asarray(x_set, dtype=np.float64)
    if x_set.ndim != 2:
        raise DimensionError(f"x_set must be 2-D, got shape {x_set.shape}")
    if not np.isfinite(x_set).all():
        raise ParameterError("x_set must be finite")
    cache = mlp_forward(model, x_set)
    preds = predictions_from_logits(cache.logits, prediction_space)
    n, k = preds.shape
    jac = np.empty((n, k, x_set.shape[1]))
    for out_dim in range(k):
        seed = np.zeros_like(preds)
        seed[:, out_dim] = 1.0
        d_logits = _d_logits_from_d_predictions(seed, preds, prediction_space)
        jac[:, out_dim, :] = mlp_backward(model, cache, d_logits).d_input
    kinks = 0
    if model.hidden_activation == "relu":
        kinks = int(sum((z == 0.0).sum() for z in cache.pre_activations[:-1]))
    return jac, kinks


def exact_jacobian(model: MlpModel, x: np.ndarray, prediction_space: str = "logits") -> JacobianReport:
    """Exact Jacobian at a single point, with Gram matrix and squared Frobenius norm."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    jac, kinks = batch_jacobians(model, x, prediction_space)
    j = jac[0]
    return JacobianReport(
        jacobian=j,
        frob_sq=float((j * j).sum()),
        gram=j.T @ j,
        relu_zero_preacts=kinks,
    )


def batch_frob_sq(model: MlpModel, x_set: np.ndarray, prediction_space: str = "logits") -> np.ndarray:
    """Squared Jacobian Frobenius norm per row of x_set."""
    jac, _ = batch_jacobians(model, x_set, prediction_space)
    return (jac * jac).sum(axis=(1, 2))


def mc_jacobian_norm(
    model: MlpModel,
    x_set: np.ndarray,
    sigma: float,
    n_pairs: int,
    rng: RngStream,
    prediction_space: str = "logits",
    chunk_rows: int = 65536,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the mean squared Jacobian norm over x_set.

    Each pair draws xi, xi' ~ N(0, sigma^2 I) independently per point and
    contributes mean_x ||f(x + xi') - f(x + xi)||^2 / (2 sigma^2). Returns
    the mean over pairs and its empirical standard error.
    """
    if sigma <= 0:
        raise ParameterError("sigma must be > 0")
    if n_pairs < 2:
        raise ParameterError("n_pairs must be >= 2")
    x_set = np.asarray(x_set, dtype=np.float64)
    if x_set.ndim != 2 or x_set.shape[1] != model.input_dim:
        raise DimensionError(f"x_set shape {x_set.shape} incompatible with input_dim {model.input_dim}")

    n_points, dim = x_set.shape
    pairs_per_chunk = max(1, chunk_rows // n_points)
    vals = np.empty(n_pairs)
    done = 0
    while done < n_pairs:
        c = min(pairs_per_chunk, n_pairs - done)
        noise_a = sigma * rng.normal(size=(c, n_points, dim))
        noise_b = sigma * rng.normal(size=(c, n_points, dim))
        flat_a = (x_set[None, :, :] + noise_a).reshape(c * n_points, dim)
        flat_b = (x_set[None, :, :] + noise_b).reshape(c * n_points, dim)
        preds_a = predictions_from_logits(mlp_forward(model, flat_a).logits, prediction_space)
        preds_b = predictions_from_logits(mlp_forward(model, flat_b).logits, prediction_space)
        sq = ((preds_a - preds_b) ** 2).sum(axis=1).reshape(c, n_points)
        vals[done : done + c] = sq.mean(axis=1) / (2.0 * sigma * sigma)
        done += c
    estimate = float(vals.mean())
    std_error = float(vals.std(ddof=1) / math.sqrt(n_pairs))
    return estimate, std_error


def quadform_variance(
    gram: np.ndarray,
    mu2: float = 1.0,
    mu3: float = 0.0,
    mu4: float = 3.0,
    m: np.ndarray | None = None,
) -> float:
    """Variance of z^T A z for i.i.d. entries of z with the given moments.

    Evaluates 2*mu2^2*Tr(A A^T) + 4*mu2*m^T A m + 4*mu3*m^T A a
    + (mu4 - 3*mu2^2)*a^T a with a = diag(A). For standard-normal z
    (mu2=1, mu3=0, mu4=3) and m=0 this reduces to 2*||A||_F^2.
    """
    a_mat = np.asarray(gram, dtype=np.float64)
    if a_mat.ndim != 2 or a_mat.shape[0] != a_mat.shape[1]:
        raise DimensionError(f"gram must be square, got shape {a_mat.shape}")
    scale = np.abs(a_mat).max()
    if np.abs(a_mat - a_mat.T).max() > 1e-9 * max(scale, 1.0):
        warnings.warn("gram is not symmetric; using (A + A^T)/2", AsymmetricGramWarning, stacklevel=2)
    a_mat = 0.5 * (a_mat + a_mat.T)
    diag = np.diag(a_mat)
    m_vec = np.zeros(a_mat.shape[0]) if m is None else np.asarray(m, dtype=np.float64)
    if m_vec.shape != (a_mat.shape[0],):
        raise DimensionError(f"m shape {m_vec.shape} incompatible with gram {a_mat.shape}")
    var = (
        2.0 * mu2 * mu2 * float((a_mat * a_mat).sum())
        + 4.0 * mu2 * float(m_vec @ a_mat @ m_vec)
        + 4.0 * mu3 * float(m_vec @ a_mat @ diag)
        + (mu4 - 3.0 * mu2 * mu2) * float(diag @ diag)
    )
    return var


def sample_bound(epsilon: float, delta: float) -> int:
    """ceil(20 * epsilon^-2 * ln(2/delta)): draws needed by the normalized
    quadratic-form estimator for error <= epsilon with probability delta.

    Constant-explicit instantiation of an asymptotic bound, not a sharp
    guarantee.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be > 0")
    if not 0 < delta < 1:
        raise ParameterError("delta must be in (0, 1)")
    return math.ceil(20.0 * epsilon**-2 * math.log(2.0 / delta))


@dataclass
class EstimatorVarianceReport:
    """Reliability summary of the quadratic-form estimator for one Gram matrix."""

    a: np.ndarray
    m: np.ndarray
    mu2: float
    mu4: float
    var_quadform: float
    n_required: int


def estimator_variance_report(
    gram: np.ndarray,
    epsilon: float,
    delta: float,
    mu2: float = 1.0,
    mu3: float = 0.0,
    mu4: float = 3.0,
    m: np.ndarray | None = None,
) -> EstimatorVarianceReport:
    """Bundle the variance formula and sample bound for a given Gram matrix."""
    gram = np.asarray(gram, dtype=np.float64)
    m_vec = np.zeros(gram.shape[0]) if m is None else np.asarray(m, dtype=np.float64)
    return EstimatorVarianceReport(
        a=np.diag(gram).copy(),
        m=m_vec,
        mu2=mu2,
        mu4=mu4,
        var_quadform=quadform_variance(gram, mu2=mu2, mu3=mu3, mu4=mu4, m=m_vec),
        n_required=sample_bound(epsilon, delta),
    )
