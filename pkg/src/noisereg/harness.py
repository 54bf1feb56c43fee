"""Experiment orchestration: data preparation, the training loop, diagnostics.

A run is fully determined by (config, seed, stream_id). Independent
sub-streams feed data generation, corruption, weight init, training draws,
and diagnostic probes, so e.g. changing the diagnostics cadence never
shifts the training trajectory. Metrics stream to disk row by row; a
killed run leaves a valid prefix, and a diverging run leaves a marker row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .datasets import LabeledDataset, load_idx, make_blobs, make_two_moons, train_test_split
from .diagnostics import CsrConfig, LidConfig, critical_sample_ratio, label_precision, lid_batch
from .errors import ConfigError, DivergenceError, NumericOverflowError, StateError
from .metrics import MetricsRow, MetricsWriter
from .nn import MlpModel, mlp_forward, per_example_cross_entropy
from .noise import corrupt
from .optim import OptimState, cosine_lr, sgd_momentum_step
from .regularizer import combined_objective, lambda_at
from .rng import RngStream

CHECKPOINT_NAME = "model.ckpt"
METRICS_NAME = "metrics.csv"


@dataclass
class RunResult:
    rows: list[MetricsRow]
    model: MlpModel


def _generate(cfg: ExperimentConfig, rng: RngStream) -> LabeledDataset:
    ds = cfg.dataset
    if ds.kind == "blobs":
        return make_blobs(ds.blobs_k, ds.blobs_d, ds.blobs_n, ds.blobs_cluster_sep, rng)
    if ds.kind == "two_moons":
        return make_two_moons(ds.moons_n, ds.moons_noise_sd, rng)
    return load_idx(ds.idx_images, ds.idx_labels)


def prepare_data(cfg: ExperimentConfig, stream_id: int = 0):
    """Generate, split, and corrupt: returns (train, test) with a clean test set.

    Corruption is applied once, offline, to the training split only; the
    test split never sees a noise model.
    """
    root = RngStream(cfg.seed, stream_id)
    data_rng = root.child(0)
    full = _generate(cfg, data_rng)
    train, test = train_test_split(full, cfg.test_fraction, data_rng)
    if cfg.noise.kind != "none":
        matrix = cfg.noise.transition_matrix(full.num_classes)
        train = corrupt(train, matrix, root.child(1))
    if test.has_noise:
        raise StateError("test split must keep clean labels")
    return train, test


def standardize_features(train: LabeledDataset, test: LabeledDataset):
    """Zero-mean unit-variance per feature, fitted on the training split.

    Constant features keep scale 1. Returns the transformed splits plus
    (mu, sd) for folding into the model afterwards.
    """
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    train_std = LabeledDataset(
        (train.features - mu) / sd, train.clean_labels, train.noisy_labels, train.num_classes
    )
    test_std = LabeledDataset(
        (test.features - mu) / sd, test.clean_labels, test.noisy_labels, test.num_classes
    )
    return train_std, test_std, mu, sd


def fold_standardization(model: MlpModel, mu: np.ndarray, sd: np.ndarray) -> MlpModel:
    """Absorb (x - mu) / sd into the first layer so the model takes raw inputs."""
    folded = model.copy()
    folded.weights[0] = model.weights[0] / sd[:, None]
    folded.biases[0] = model.biases[0] - (mu / sd) @ model.weights[0]
    return folded


def _forward_chunked(model: MlpModel, features: np.ndarray, chunk: int = 8192) -> np.ndarray:
    if features.shape[0] <= chunk:
        return mlp_forward(model, features).logits
    return np.vstack(
        [mlp_forward(model, features[i : i + chunk]).logits for i in range(0, features.shape[0], chunk)]
    )


def _lid_over_batches(model, features, cfg: ExperimentConfig, rng: RngStream) -> float:
    n = features.shape[0]
    batch = min(cfg.lid_batch_size, n)
    if batch <= cfg.lid_k:
        raise ConfigError(f"lid_k={cfg.lid_k} needs batches larger than it; have {batch} points")
    n_batches = min(cfg.lid_batches, n // batch)
    perm = rng.permutation(n)
    lid_cfg = LidConfig(k=cfg.lid_k, batch_size=batch)
    values = []
    for b in range(n_batches):
        est = lid_batch(model, features[perm[b * batch : (b + 1) * batch]], lid_cfg)
        values.append(est.per_point[np.isfinite(est.per_point)])
    pooled = np.concatenate(values) if values else np.array([])
    return float(pooled.mean()) if pooled.size else float("nan")


def _diagnostics_row(
    cfg: ExperimentConfig,
    model: MlpModel,
    train: LabeledDataset,
    test: LabeledDataset,
    epoch: int,
    lr: float,
    lam: float,
    rv_mean: float,
    diag_rng: RngStream,
) -> MetricsRow:
    train_logits = _forward_chunked(model, train.features)
    losses = per_example_cross_entropy(train_logits, train.noisy_labels)
    train_pred = np.argmax(train_logits, axis=1)
    test_pred = np.argmax(_forward_chunked(model, test.features), axis=1)

    eta = cfg.noise.eta if cfg.noise.kind != "none" else 0.0
    csr_n = min(cfg.csr_sample, len(train))
    csr_idx = diag_rng.permutation(len(train))[:csr_n]
    csr = critical_sample_ratio(
        model,
        train.features[csr_idx],
        CsrConfig(radius=cfg.csr_radius, probes=cfg.csr_probes, step=cfg.csr_step),
        diag_rng,
    )
    return MetricsRow(
        epoch=epoch,
        lr=lr,
        lambda_eff=lam,
        train_loss=float(losses.mean()),
        train_acc_vs_noisy=float((train_pred == train.noisy_labels).mean()),
        train_acc_vs_clean=float((train_pred == train.clean_labels).mean()),
        test_acc=float((test_pred == test.clean_labels).mean()),
        label_precision=label_precision(losses, train.clean_mask, eta),
        lid_mean=_lid_over_batches(model, train.features, cfg, diag_rng),
        csr=csr,
        rv_hat_mean=rv_mean,
    )


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    stream_id: int = 0,
) -> RunResult:
    """Train under the combined objective, recording diagnostics periodically.

    With out_dir set, metrics.csv streams continuously and the final model
    is checkpointed there. On numeric divergence the metrics file keeps its
    last valid rows plus a NaN marker row, and DivergenceError is raised.

    Features are standardized on the training split before optimization;
    the returned (and checkpointed) model has that transform folded into
    its first layer, so it consumes raw features.
    """
    train, test = prepare_data(cfg, stream_id)
    train, test, mu, sd = standardize_features(train, test)
    root = RngStream(cfg.seed, stream_id)
    model = MlpModel.init(
        [train.dim] + list(cfg.hidden_dims) + [train.num_classes],
        root.child(2),
        hidden_activation=cfg.activation,
        dropout_rate=cfg.dropout_rate,
    )
    train_rng = root.child(3)
    diag_rng = root.child(4)

    n_train = len(train)
    steps_per_epoch = math.ceil(n_train / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    state = OptimState.for_model(
        model,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        base_lr=cfg.base_lr,
        total_steps=total_steps,
    )

    writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = MetricsWriter(out_dir / METRICS_NAME)

    rows: list[MetricsRow] = []
    step = 0
    lr = cosine_lr(0, total_steps, cfg.base_lr)
    try:
        for epoch_idx in range(cfg.epochs):
            epoch = epoch_idx + 1
            lam = lambda_at(epoch_idx, cfg.regularizer)
            perm = train_rng.permutation(n_train)
            rv_values = []
            for start in range(0, n_train, cfg.batch_size):
                batch_idx = perm[start : start + cfg.batch_size]
                lr = cosine_lr(step, total_steps, cfg.base_lr)
                try:
                    obj = combined_objective(
                        model,
                        train.features[batch_idx],
                        train.noisy_labels[batch_idx],
                        cfg.perturb,
                        cfg.regularizer,
                        epoch_idx,
                        train_rng,
                    )
                except NumericOverflowError as exc:
                    _write_divergence_marker(writer, rows, epoch, lr, lam)
                    raise DivergenceError(f"epoch {epoch}: {exc}") from exc
                if not np.isfinite(obj.loss):
                    _write_divergence_marker(writer, rows, epoch, lr, lam)
                    raise DivergenceError(f"epoch {epoch}: non-finite loss")
                rv_values.append(obj.components.rv)
                sgd_momentum_step(model, obj.grads, state, lr)
                step += 1
            if epoch % cfg.diagnostics_every == 0 or epoch == cfg.epochs:
                row = _diagnostics_row(
                    cfg, model, train, test, epoch, lr, lam, float(np.mean(rv_values)), diag_rng
                )
                rows.append(row)
                if writer is not None:
                    writer.write_row(row)
    finally:
        if writer is not None:
            writer.close()

    model = fold_standardization(model, mu, sd)
    if out_dir is not None:
        save_checkpoint(model, Path(out_dir) / CHECKPOINT_NAME)
    return RunResult(rows=rows, model=model)


def _write_divergence_marker(writer, rows, epoch, lr, lam):
    nan = float("nan")
    marker = MetricsRow(epoch, lr, lam, nan, nan, nan, nan, nan, nan, nan, nan)
    rows.append(marker)
    if writer is not None:
        writer.write_row(marker)
