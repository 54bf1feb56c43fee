"""Variance regularizer over paired stochastic forward passes.

The regularizer is the batch mean of ||f(x; theta, xi') - f(x; theta, xi)||^2
for two independent perturbation draws xi, xi'. It never reads labels, its
expectation equals twice the summed per-dimension predictive variance, and
for small Gaussian input noise it estimates 2*sigma^2 times the squared
Jacobian Frobenius norm. The combined training objective adds it to the
cross-entropy of the first (xi) pass, so each step costs exactly two
forward passes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .nn import (
    ForwardCache,
    ForwardDraws,
    Gradients,
    MlpModel,
    PerturbationSpec,
    mlp_backward,
    mlp_forward,
    softmax,
    softmax_cross_entropy,
)
from .rng import RngStream

PREDICTION_SPACES = ("logits", "probabilities")


class DegeneratePerturbationWarning(UserWarning):
    """The perturbation is null, so the variance regularizer is identically zero."""


@dataclass
class RegularizerConfig:
    """Weight schedule and prediction space for the variance term."""

    lambda_max: float = 0.0
    rampup_epochs: int = 5
    prediction_space: str = "probabilities"

    def __post_init__(self):
        if self.lambda_max < 0:
            raise ParameterError("lambda_max must be >= 0")
        if self.rampup_epochs < 0:
            raise ParameterError("rampup_epochs must be >= 0")
        if self.prediction_space not in PREDICTION_SPACES:
            raise ParameterError(f"prediction_space must be one of {PREDICTION_SPACES}")


def lambda_at(epoch: int, cfg: RegularizerConfig) -> float:
    """Regularizer weight at a 0-based epoch: exp(-5*(1 - t/T)^2) ramp up to lambda_max."""
    if epoch < 0:
        raise ParameterError("epoch must be >= 0")
    t_ramp = cfg.rampup_epochs
    if t_ramp == 0:
        return cfg.lambda_max
    t = min(epoch, t_ramp)
    return cfg.lambda_max * float(np.exp(-5.0 * (1.0 - t / t_ramp) ** 2))


def predictions_from_logits(logits: np.ndarray, prediction_space: str) -> np.ndarray:
    if prediction_space == "logits":
        return logits
    return softmax(logits)


def _d_logits_from_d_predictions(d_preds, preds, prediction_space):
    # Softmax VJP: dz = p * (g - <g, p>) row-wise; identity in logits space.
    if prediction_space == "logits":
        return d_preds
    inner = (d_preds * preds).sum(axis=1, keepdims=True)
    return preds * (d_preds - inner)


@dataclass
class RvResult:
    """Value and parameter gradients of the sampled variance regularizer."""

    value: float
    grads: Gradients
    cache_a: ForwardCache | None = None
    cache_b: ForwardCache | None = None


def _zero_grads(model: MlpModel, n_rows: int) -> Gradients:
    return Gradients(
        [np.zeros_like(w) for w in model.weights],
        [np.zeros_like(b) for b in model.biases],
        np.zeros((n_rows, model.input_dim)),
    )


def r_v_hat(
    model: MlpModel,
    x_batch: np.ndarray,
    perturb: PerturbationSpec,
    rng: RngStream | None = None,
    prediction_space: str = "probabilities",
    draws: tuple[ForwardDraws, ForwardDraws] | None = None,
) -> RvResult:
    """Sampled variance regularizer with gradients through both passes.

    Runs two forward passes under independent draws from perturb and
    returns the batch mean of the squared prediction difference. Explicit
    draws freeze both perturbations (used for replay and for
    finite-difference checks).
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.shape[0] == 0:
        raise ParameterError("x_batch must be nonempty")
    if draws is None and perturb.is_null(model):
        warnings.warn(
            "perturbation is degenerate (sigma=0, dropout off): the variance regularizer is 0",
            DegeneratePerturbationWarning,
            stacklevel=2,
        )
        return RvResult(0.0, _zero_grads(model, x_batch.shape[0]))

    draws_a, draws_b = draws if draws is not None else (None, None)
    cache_a = mlp_forward(model, x_batch, perturb, rng, draws=draws_a)
    cache_b = mlp_forward(model, x_batch, perturb, rng, draws=draws_b)

    preds_a = predictions_from_logits(cache_a.logits, prediction_space)
    preds_b = predictions_from_logits(cache_b.logits, prediction_space)
    diff = preds_a - preds_b
    n = x_batch.shape[0]
    value = float((diff * diff).sum() / n)

    d_preds = (2.0 / n) * diff
    d_logits_a = _d_logits_from_d_predictions(d_preds, preds_a, prediction_space)
    d_logits_b = _d_logits_from_d_predictions(-d_preds, preds_b, prediction_space)
    grads = mlp_backward(model, cache_a, d_logits_a) + mlp_backward(model, cache_b, d_logits_b)
    return RvResult(value, grads, cache_a, cache_b)


@dataclass
class ObjectiveComponents:
    ce: float
    rv: float
    lambda_eff: float


@dataclass
class Objective:
    loss: float
    grads: Gradients
    components: ObjectiveComponents


def combined_objective(
    model: MlpModel,
    x_batch: np.ndarray,
    noisy_labels: np.ndarray,
    perturb: PerturbationSpec,
    cfg: RegularizerConfig,
    epoch: int,
    rng: RngStream | None = None,
    draws: tuple[ForwardDraws, ForwardDraws] | None = None,
) -> Objective:
    """Cross-entropy plus the ramped variance term, with exact gradients.

    The cross-entropy is taken on the first stochastic pass, which is also
    one of the two variance-term passes, so each call runs exactly two
    forwards. With lambda_max = 0 the loss and gradients coincide with
    plain cross-entropy training on the perturbed inputs.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    lam = lambda_at(epoch, cfg)
    degenerate = draws is None and perturb.is_null(model)
    if degenerate and cfg.lambda_max > 0:
        warnings.warn(
            "perturbation is degenerate (sigma=0, dropout off): the variance regularizer is 0",
            DegeneratePerturbationWarning,
            stacklevel=2,
        )

    draws_a, draws_b = draws if draws is not None else (None, None)
    cache_a = mlp_forward(model, x_batch, perturb, rng, draws=draws_a)
    ce, d_logits_ce = softmax_cross_entropy(cache_a.logits, noisy_labels)

    if degenerate:
        grads = mlp_backward(model, cache_a, d_logits_ce)
        return Objective(ce, grads, ObjectiveComponents(ce=ce, rv=0.0, lambda_eff=lam))

    cache_b = mlp_forward(model, x_batch, perturb, rng, draws=draws_b)
    space = cfg.prediction_space
    preds_a = predictions_from_logits(cache_a.logits, space)
    preds_b = predictions_from_logits(cache_b.logits, space)
    diff = preds_a - preds_b
    n = x_batch.shape[0]
    rv = float((diff * diff).sum() / n)

    d_logits_a = d_logits_ce
    if lam > 0:
        d_preds = (2.0 / n) * diff
        d_logits_a = d_logits_ce + lam * _d_logits_from_d_predictions(d_preds, preds_a, space)
        grads = mlp_backward(model, cache_a, d_logits_a) + mlp_backward(
            model, cache_b, lam * _d_logits_from_d_predictions(-d_preds, preds_b, space)
        )
    else:
        grads = mlp_backward(model, cache_a, d_logits_a)

    return Objective(ce + lam * rv, grads, ObjectiveComponents(ce=ce, rv=rv, lambda_eff=lam))
