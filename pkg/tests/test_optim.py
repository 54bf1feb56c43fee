"""Optimizer update rule and learning-rate schedule."""

import numpy as np
import pytest

from noisereg import MlpModel, OptimState, ParameterError, cosine_lr, sgd_momentum_step
from noisereg.nn import Gradients


def scalar_model(w=1.0):
    return MlpModel([1, 1], [np.array([[w]])], [np.zeros(1)])


def scalar_grads(g):
    return Gradients([np.array([[g]])], [np.zeros(1)], np.zeros((1, 1)))


class TestSgdMomentumStep:
    def test_zero_lr_updates_velocity_only(self):
        model = scalar_model(1.0)
        state = OptimState.for_model(model, momentum=0.9)
        sgd_momentum_step(model, scalar_grads(2.0), state, lr=0.0)
        assert model.weights[0][0, 0] == 1.0
        assert state.velocity_w[0][0, 0] == 2.0

    def test_plain_gradient_descent_on_quadratic(self):
        """One step on f(w) = w^2 from w=1 with lr=0.1 lands on 0.8."""
        model = scalar_model(1.0)
        state = OptimState.for_model(model, momentum=0.0, weight_decay=0.0)
        sgd_momentum_step(model, scalar_grads(2.0 * 1.0), state, lr=0.1)
        assert model.weights[0][0, 0] == pytest.approx(0.8, abs=1e-15)

    def test_second_displacement_with_momentum(self):
        """Constant gradient g: the second step moves by 1.9 * lr * g."""
        g, lr = 0.7, 0.05
        model = scalar_model(0.0)
        state = OptimState.for_model(model, momentum=0.9)
        sgd_momentum_step(model, scalar_grads(g), state, lr=lr)
        after_first = model.weights[0][0, 0]
        sgd_momentum_step(model, scalar_grads(g), state, lr=lr)
        displacement = model.weights[0][0, 0] - after_first
        assert displacement == pytest.approx(-1.9 * lr * g, rel=1e-12)

    def test_weight_decay_is_coupled(self):
        model = scalar_model(2.0)
        state = OptimState.for_model(model, momentum=0.0, weight_decay=0.1)
        sgd_momentum_step(model, scalar_grads(0.0), state, lr=0.5)
        # v = 0 + (0 + 0.1 * 2) = 0.2; w = 2 - 0.5 * 0.2
        assert model.weights[0][0, 0] == pytest.approx(1.9, abs=1e-15)

    def test_applies_to_biases_too(self):
        model = MlpModel([1, 1], [np.zeros((1, 1))], [np.array([1.0])])
        state = OptimState.for_model(model, momentum=0.0)
        sgd_momentum_step(model, Gradients([np.zeros((1, 1))], [np.array([0.5])], np.zeros((1, 1))), state, 0.2)
        assert model.biases[0][0] == pytest.approx(0.9, abs=1e-15)

    def test_momentum_range_validated(self):
        model = scalar_model()
        with pytest.raises(ParameterError):
            OptimState.for_model(model, momentum=1.0)


class TestCosineLr:
    def test_endpoints_and_midpoint(self):
        assert cosine_lr(0, 100, 0.1) == pytest.approx(0.1, rel=1e-15)
        assert cosine_lr(100, 100, 0.1) == pytest.approx(0.0, abs=1e-17)
        assert cosine_lr(50, 100, 0.1) == pytest.approx(0.05, rel=1e-12)

    def test_monotone_decreasing(self):
        vals = [cosine_lr(s, 40, 1.0) for s in range(41)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_range_errors(self):
        with pytest.raises(ParameterError):
            cosine_lr(11, 10, 0.1)
        with pytest.raises(ParameterError):
            cosine_lr(-1, 10, 0.1)
        with pytest.raises(ParameterError):
            cosine_lr(0, 0, 0.1)
