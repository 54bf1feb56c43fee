"""Flat key-value experiment configuration with fail-fast parsing.

The config file is plain text: one `key = value` per line, `#` comments,
blank lines ignored. Unknown or duplicate keys are errors so typos never
silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .nn import PerturbationSpec
from .noise import NoiseModel
from .regularizer import RegularizerConfig

DATASET_KINDS = ("blobs", "two_moons", "idx")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str) -> list[int]:
    raw = raw.strip()
    if not raw:
        return []
    return [int(part) for part in raw.split(",")]


@dataclass
class DatasetSpec:
    """Which dataset to build or load, with its generator parameters."""

    kind: str = "blobs"
    blobs_k: int = 4
    blobs_d: int = 20
    blobs_n: int = 2000
    blobs_cluster_sep: float = 10.0
    moons_n: int = 2000
    moons_noise_sd: float = 0.1
    idx_images: str = ""
    idx_labels: str = ""


@dataclass
class ExperimentConfig:
    """Everything a training run needs, grouped by subsystem."""

    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    noise: NoiseModel = field(default_factory=NoiseModel)
    hidden_dims: list[int] = field(default_factory=lambda: [256])
    activation: str = "relu"
    dropout_rate: float = 0.0
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 150
    batch_size: int = 128
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    perturb: PerturbationSpec = field(default_factory=PerturbationSpec)
    seed: int = 0
    diagnostics_every: int = 5
    test_fraction: float = 0.2
    lid_k: int = 20
    lid_batch_size: int = 128
    lid_batches: int = 10
    csr_radius: float = 0.25
    csr_probes: int = 10
    csr_step: float | None = None
    csr_sample: int = 128

    def __post_init__(self):
        if self.dataset.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset must be one of {DATASET_KINDS}, got {self.dataset.kind!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.diagnostics_every < 1:
            raise ConfigError("diagnostics_every must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.base_lr < 0 or self.weight_decay < 0:
            raise ConfigError("base_lr and weight_decay must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if self.lid_k < 2 or self.lid_k >= self.lid_batch_size:
            raise ConfigError("need 2 <= lid_k < lid_batch_size")
        if self.lid_batches < 1:
            raise ConfigError("lid_batches must be >= 1")
        if self.csr_radius <= 0 or self.csr_probes < 1 or self.csr_sample < 1:
            raise ConfigError("csr_radius must be > 0, csr_probes and csr_sample >= 1")


# key -> (target, attribute, parser); targets are subobjects of ExperimentConfig.
_KEY_TABLE = {
    "dataset": ("dataset", "kind", str),
    "blobs_k": ("dataset", "blobs_k", int),
    "blobs_d": ("dataset", "blobs_d", int),
    "blobs_n": ("dataset", "blobs_n", int),
    "blobs_cluster_sep": ("dataset", "blobs_cluster_sep", float),
    "moons_n": ("dataset", "moons_n", int),
    "moons_noise_sd": ("dataset", "moons_noise_sd", float),
    "idx_images": ("dataset", "idx_images", str),
    "idx_labels": ("dataset", "idx_labels", str),
    "noise": ("noise", "kind", str),
    "eta": ("noise", "eta", float),
    "allow_self_flip": ("noise", "allow_self_flip", _parse_bool),
    "hidden_dims": ("", "hidden_dims", _parse_int_list),
    "activation": ("", "activation", str),
    "dropout_rate": ("", "dropout_rate", float),
    "base_lr": ("", "base_lr", float),
    "momentum": ("", "momentum", float),
    "weight_decay": ("", "weight_decay", float),
    "epochs": ("", "epochs", int),
    "batch_size": ("", "batch_size", int),
    "lambda_max": ("regularizer", "lambda_max", float),
    "rampup_epochs": ("regularizer", "rampup_epochs", int),
    "prediction_space": ("regularizer", "prediction_space", str),
    "gaussian_sigma": ("perturb", "gaussian_sigma", float),
    "dropout_on": ("perturb", "dropout_on", _parse_bool),
    "seed": ("", "seed", int),
    "diagnostics_every": ("", "diagnostics_every", int),
    "test_fraction": ("", "test_fraction", float),
    "lid_k": ("", "lid_k", int),
    "lid_batch_size": ("", "lid_batch_size", int),
    "lid_batches": ("", "lid_batches", int),
    "csr_radius": ("", "csr_radius", float),
    "csr_probes": ("", "csr_probes", int),
    "csr_step": ("", "csr_step", float),
    "csr_sample": ("", "csr_sample", int),
}


def config_from_dict(raw: dict[str, str]) -> ExperimentConfig:
    """Build a validated config from string key-value pairs."""
    values: dict[str, dict] = {"": {}, "dataset": {}, "noise": {}, "regularizer": {}, "perturb": {}}
    for key, raw_value in raw.items():
        if key not in _KEY_TABLE:
            raise ConfigError(f"unknown config key {key!r}")
        target, attr, parser = _KEY_TABLE[key]
        try:
            values[target][attr] = parser(raw_value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    try:
        cfg = ExperimentConfig(
            dataset=DatasetSpec(**values["dataset"]),
            noise=NoiseModel(**values["noise"]),
            regularizer=RegularizerConfig(**values["regularizer"]),
            perturb=PerturbationSpec(**values["perturb"]),
            **values[""],
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from None
    if cfg.dataset.kind == "idx" and (not cfg.dataset.idx_images or not cfg.dataset.idx_labels):
        raise ConfigError("dataset 'idx' requires idx_images and idx_labels")
    return cfg


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))
