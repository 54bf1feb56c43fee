"""Render metrics CSVs into figures plus a delimited summary table.

The report path is deliberately separate from training: runs emit CSV
only, and this module turns one or more of those files into epoch-curve
PNGs (accuracy, label precision, LID, CSR, regularizer value) written
alongside a summary.csv of per-run endpoints.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import numpy as np

from .metrics import MetricsRow, read_metrics_csv


def _series(rows: list[MetricsRow], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in rows], dtype=np.float64)


def _run_labels(paths: list[Path]) -> list[str]:
    stems = [p.stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{p.parent.name}/{p.stem}" if p.parent.name else p.stem for p in paths]


def _curve_figure(out_path, runs, metric_names, ylabel, ylim=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    linestyles = ["-", "--", ":", "-."]
    for label, rows in runs:
        epochs = _series(rows, "epoch")
        for style, metric in zip(linestyles, metric_names):
            suffix = "" if len(metric_names) == 1 else f" {metric}"
            ax.plot(epochs, _series(rows, metric), style, label=f"{label}{suffix}")
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def _final(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    return float(finite[-1]) if finite.size else math.nan


def write_summary_csv(runs, out_path) -> Path:
    header = (
        "run,final_epoch,final_test_acc,peak_test_acc,final_train_acc_vs_noisy,"
        "final_label_precision,final_lid_mean,min_lid_mean,final_csr,final_rv_hat_mean"
    )
    lines = [header]
    for label, rows in runs:
        test = _series(rows, "test_acc")
        lid = _series(rows, "lid_mean")
        finite_test = test[np.isfinite(test)]
        finite_lid = lid[np.isfinite(lid)]
        fields = [
            label,
            str(int(rows[-1].epoch)) if rows else "0",
            format(_final(test), ".17g"),
            format(float(finite_test.max()) if finite_test.size else math.nan, ".17g"),
            format(_final(_series(rows, "train_acc_vs_noisy")), ".17g"),
            format(_final(_series(rows, "label_precision")), ".17g"),
            format(_final(lid), ".17g"),
            format(float(finite_lid.min()) if finite_lid.size else math.nan, ".17g"),
            format(_final(_series(rows, "csr")), ".17g"),
            format(_final(_series(rows, "rv_hat_mean")), ".17g"),
        ]
        lines.append(",".join(fields))
    out_path = Path(out_path)
    out_path.write_text("\n".join(lines) + "\n")
    return out_path


def render_report(metrics_paths, out_dir) -> list[Path]:
    """Read metrics CSVs and write figures + summary.csv into out_dir."""
    paths = [Path(p) for p in metrics_paths]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = [(label, read_metrics_csv(p)) for label, p in zip(_run_labels(paths), paths)]

    written = [
        _curve_figure(out_dir / "accuracy.png", runs, ["test_acc", "train_acc_vs_noisy"], "accuracy", (0, 1)),
        _curve_figure(out_dir / "label_precision.png", runs, ["label_precision"], "label precision", (0, 1)),
        _curve_figure(out_dir / "lid.png", runs, ["lid_mean"], "mean LID"),
        _curve_figure(out_dir / "csr.png", runs, ["csr"], "critical sample ratio", (0, 1)),
        _curve_figure(out_dir / "regularizer.png", runs, ["rv_hat_mean"], "variance regularizer"),
        _curve_figure(out_dir / "lambda.png", runs, ["lambda_eff"], "effective lambda"),
        write_summary_csv(runs, out_dir / "summary.csv"),
    ]
    return written
