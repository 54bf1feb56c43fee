"""Shared oracles for the test suite.

The finite-difference helpers are deliberately independent of the
backpropagation code under test: they only ever call forward passes.
"""

import numpy as np

from noisereg import MlpModel


def fd_param_grads(loss_fn, model: MlpModel, h: float = 1e-6):
    """Central finite differences of loss_fn(model) w.r.t. every parameter.

    Mutates each parameter in place by +-h and restores it; loss_fn must
    therefore be a pure function of the model's current parameters.
    """
    grads_w, grads_b = [], []
    for param_list, grad_list in ((model.weights, grads_w), (model.biases, grads_b)):
        for p in param_list:
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + h
                lp = loss_fn(model)
                p[idx] = orig - h
                lm = loss_fn(model)
                p[idx] = orig
                g[idx] = (lp - lm) / (2 * h)
            grad_list.append(g)
    return grads_w, grads_b


def max_rel_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())


def grad_check(loss_fn, model: MlpModel, grads, h: float = 1e-6) -> float:
    """Max relative error of analytic parameter gradients vs central differences."""
    fd_w, fd_b = fd_param_grads(loss_fn, model, h=h)
    worst = 0.0
    for analytic, numeric in zip(grads.weights + grads.biases, fd_w + fd_b):
        worst = max(worst, max_rel_error(analytic, numeric))
    return worst
