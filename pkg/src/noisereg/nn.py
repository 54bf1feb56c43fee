"""Multilayer perceptron with exact reverse-mode gradients.

All numerics are float64. A forward pass retains everything backward needs
(layer inputs, pre-activations, dropout masks, the input-noise draw), and
the recorded draws can be replayed to reproduce the logits bit-exactly.
Perturbations are additive Gaussian input noise and inverted dropout on
the hidden activations; both are treated as constants by backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, LabelError, NumericOverflowError, ParameterError, StateError
from .rng import RngStream

ACTIVATIONS = ("relu", "tanh")


@dataclass
class PerturbationSpec:
    """Stochastic perturbation applied during a forward pass.

    gaussian_sigma is the standard deviation of additive input noise;
    dropout_on enables the model's dropout rate for the pass. Separate
    passes under the same spec draw independent perturbations.
    """

    gaussian_sigma: float = 0.0
    dropout_on: bool = False

    def __post_init__(self):
        sigma = float(self.gaussian_sigma)
        if not np.isfinite(sigma) or sigma < 0:
            raise ParameterError(f"gaussian_sigma must be finite and >= 0, got {self.gaussian_sigma}")
        self.gaussian_sigma = sigma

    def is_null(self, model: "MlpModel") -> bool:
        """True when a pass under this spec is fully deterministic."""
        return self.gaussian_sigma == 0.0 and not (self.dropout_on and model.dropout_rate > 0.0)


NULL_PERTURBATION = PerturbationSpec(0.0, False)


@dataclass
class MlpModel:
    """Fully-connected classifier parameters.

    layer_dims is [input_dim, hidden..., n_classes]; weights[l] has shape
    (layer_dims[l], layer_dims[l+1]) so activations propagate row-major as
    x @ W + b.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        dims = [int(d) for d in self.layer_dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise DimensionError(f"layer_dims must list >= 2 positive sizes, got {self.layer_dims}")
        self.layer_dims = dims
        if self.hidden_activation not in ACTIVATIONS:
            raise ParameterError(f"hidden_activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DimensionError("need one weight and bias per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise DimensionError(
                    f"layer {l}: weight {w.shape} / bias {b.shape} inconsistent with dims {dims}"
                )

    @classmethod
    def init(
        cls,
        layer_dims: list[int],
        rng: RngStream,
        hidden_activation: str = "relu",
        dropout_rate: float = 0.0,
    ) -> "MlpModel":
        """Seeded init: W ~ U(-g, g) with g = sqrt(2 / fan_in), zero biases."""
        dims = [int(d) for d in layer_dims]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            gain = np.sqrt(2.0 / fan_in)
            weights.append(rng.uniform(-gain, gain, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases, hidden_activation, dropout_rate)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_hidden(self) -> int:
        return len(self.layer_dims) - 2

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.dropout_rate,
        )


@dataclass
class ForwardDraws:
    """Concrete perturbation realizations for one pass.

    input_noise is the additive noise itself (already scaled by sigma);
    dropout_masks hold the inverted-dropout multipliers per hidden layer.
    Feeding the same draws back through the network replays the pass.
    """

    input_noise: np.ndarray | None = None
    dropout_masks: list[np.ndarray | None] = field(default_factory=list)


@dataclass
class ForwardCache:
    """Everything retained by mlp_forward for backprop and replay."""

    layer_dims: list[int]
    x_input: np.ndarray
    x_fed: np.ndarray
    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    hidden_outputs: list[np.ndarray]
    draws: ForwardDraws
    logits: np.ndarray


def sample_draws(model: MlpModel, n_rows: int, perturb: PerturbationSpec, rng: RngStream) -> ForwardDraws:
    """Draw one realization of the perturbation for a batch of n_rows."""
    noise = None
    if perturb.gaussian_sigma > 0.0:
        noise = perturb.gaussian_sigma * rng.normal(size=(n_rows, model.input_dim))
    masks: list[np.ndarray | None] = []
    p = model.dropout_rate
    if perturb.dropout_on and p > 0.0:
        keep = 1.0 - p
        for h in model.layer_dims[1:-1]:
            masks.append((rng.random(size=(n_rows, h)) >= p).astype(np.float64) / keep)
    else:
        masks = [None] * model.n_hidden
    return ForwardDraws(input_noise=noise, dropout_masks=masks)


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def mlp_forward(
    model: MlpModel,
    x_batch: np.ndarray,
    perturb: PerturbationSpec | None = None,
    rng: RngStream | None = None,
    draws: ForwardDraws | None = None,
) -> ForwardCache:
    """Run the network on a batch, retaining activations for backprop.

    With the null perturbation the output is a deterministic function of
    (model, x_batch). Explicit draws override sampling and make the pass a
    pure replay; otherwise an active perturbation requires rng.
    """
    perturb = perturb or NULL_PERTURBATION
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionError(f"input shape {x.shape} incompatible with input_dim {model.input_dim}")

    if draws is None:
        if not perturb.is_null(model) and rng is None:
            raise ParameterError("an active perturbation requires an rng stream")
        draws = sample_draws(model, x.shape[0], perturb, rng) if not perturb.is_null(model) else ForwardDraws(
            dropout_masks=[None] * model.n_hidden
        )
    elif len(draws.dropout_masks) != model.n_hidden:
        raise StateError("draws do not match the model's hidden layer count")

    x_fed = x + draws.input_noise if draws.input_noise is not None else x

    layer_inputs, pre_activations, hidden_outputs = [], [], []
    a = x_fed
    n_layers = len(model.layer_dims) - 1
    for l in range(n_layers):
        layer_inputs.append(a)
        with np.errstate(over="ignore", invalid="ignore"):
            z = a @ model.weights[l] + model.biases[l]
        if not np.isfinite(z).all():
            raise NumericOverflowError(f"non-finite pre-activation at layer {l}")
        pre_activations.append(z)
        if l < n_layers - 1:
            h = _activate(z, model.hidden_activation)
            hidden_outputs.append(h)
            mask = draws.dropout_masks[l]
            a = h * mask if mask is not None else h
        else:
            a = z
    return ForwardCache(
        layer_dims=list(model.layer_dims),
        x_input=x,
        x_fed=x_fed,
        layer_inputs=layer_inputs,
        pre_activations=pre_activations,
        hidden_outputs=hidden_outputs,
        draws=draws,
        logits=a,
    )


def replay_forward(model: MlpModel, cache: ForwardCache) -> np.ndarray:
    """Recompute logits from the recorded draws; bit-identical to the original."""
    return mlp_forward(model, cache.x_input, draws=cache.draws).logits


@dataclass
class Gradients:
    """Parameter gradients plus the gradient w.r.t. the (unperturbed) input."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    d_input: np.ndarray

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
            self.d_input + other.d_input,
        )

    def scaled(self, c: float) -> "Gradients":
        return Gradients([c * w for w in self.weights], [c * b for b in self.biases], c * self.d_input)


def mlp_backward(model: MlpModel, cache: ForwardCache, d_logits: np.ndarray) -> Gradients:
    """Exact reverse-mode gradients for a recorded forward pass.

    Dropout masks and the input-noise draw in the cache are constants, so
    the returned gradients are the plain chain rule through the replayed
    computation. Hidden relu units sitting exactly at zero pre-activation
    get derivative 0.
    """
    if cache is None:
        raise StateError("missing forward cache")
    if cache.layer_dims != model.layer_dims:
        raise StateError("forward cache was produced by a different architecture")
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != cache.logits.shape:
        raise DimensionError(f"d_logits shape {d_logits.shape} != logits shape {cache.logits.shape}")

    n_layers = len(model.layer_dims) - 1
    grad_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]

    delta = d_logits
    for l in range(n_layers - 1, -1, -1):
        grad_w[l] = cache.layer_inputs[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        d_prev = delta @ model.weights[l].T
        if l > 0:
            mask = cache.draws.dropout_masks[l - 1]
            if mask is not None:
                d_prev = d_prev * mask
            if model.hidden_activation == "relu":
                d_prev = d_prev * (cache.pre_activations[l - 1] > 0.0)
            else:
                d_prev = d_prev * (1.0 - cache.hidden_outputs[l - 1] ** 2)
        delta = d_prev
    return Gradients(grad_w, grad_b, delta)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(labels, k):
    labels = np.asarray(labels)
    bad = np.nonzero((labels < 0) | (labels >= k))[0]
    if bad.size:
        raise LabelError(f"label {labels[bad[0]]} at index {bad[0]} outside [0, {k})")
    return labels.astype(np.int64)


def per_example_cross_entropy(logits: np.ndarray, labels) -> np.ndarray:
    """-log softmax(logits)[label] per row, computed via logsumexp."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, logits.shape[1])
    shift = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shift).sum(axis=1))
    return lse - shift[np.arange(len(labels)), labels]


def softmax_cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise NumericOverflowError("non-finite logits")
    labels = _check_labels(labels, logits.shape[1])
    n = logits.shape[0]
    loss = float(per_example_cross_entropy(logits, labels).mean())
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
