"""Momentum SGD with coupled weight decay, and the cosine learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .nn import Gradients, MlpModel


@dataclass
class OptimState:
    """Velocity buffers plus the hyperparameters of one training run."""

    velocity_w: list[np.ndarray]
    velocity_b: list[np.ndarray]
    momentum: float = 0.9
    weight_decay: float = 0.0
    base_lr: float = 0.1
    total_steps: int = 1

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise ParameterError("weight_decay must be >= 0")

    @classmethod
    def for_model(
        cls,
        model: MlpModel,
        momentum: float = 0.9,
        weight_decay: float = 0.0,
        base_lr: float = 0.1,
        total_steps: int = 1,
    ) -> "OptimState":
        return cls(
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases],
            momentum,
            weight_decay,
            base_lr,
            total_steps,
        )


def sgd_momentum_step(model: MlpModel, grads: Gradients, state: OptimState, lr: float) -> None:
    """One in-place update: v <- m*v + (g + wd*p); p <- p - lr*v.

    Weight decay is coupled (added to the gradient) and applies to weights
    and biases alike. lr = 0 leaves parameters unchanged but still updates
    the velocity.
    """
    if lr < 0:
        raise ParameterError("lr must be >= 0")
    if len(grads.weights) != len(model.weights):
        raise DimensionError("gradient/parameter layer count mismatch")
    for p, g, v in zip(model.weights, grads.weights, state.velocity_w):
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        v *= state.momentum
        v += g + state.weight_decay * p
        p -= lr * v
    for p, g, v in zip(model.biases, grads.biases, state.velocity_b):
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        v *= state.momentum
        v += g + state.weight_decay * p
        p -= lr * v


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Single-cycle cosine annealing: 0.5*base_lr*(1 + cos(pi*step/total_steps))."""
    if total_steps <= 0:
        raise ParameterError("total_steps must be > 0")
    if step < 0 or step > total_steps:
        raise ParameterError(f"step {step} outside [0, {total_steps}]")
    return 0.5 * base_lr * (1.0 + np.cos(np.pi * step / total_steps))
