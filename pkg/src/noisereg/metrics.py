"""Per-epoch metrics rows and their CSV serialization.

Reals are written with 17 significant digits so write-then-read round-trips
float64 exactly. The writer flushes after every row: a killed run leaves a
parseable prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import FormatError

METRICS_COLUMNS = (
    "epoch",
    "lr",
    "lambda_eff",
    "train_loss",
    "train_acc_vs_noisy",
    "train_acc_vs_clean",
    "test_acc",
    "label_precision",
    "lid_mean",
    "csr",
    "rv_hat_mean",
)
METRICS_HEADER = ",".join(METRICS_COLUMNS)


@dataclass
class MetricsRow:
    """One diagnostics snapshot of a training run."""

    epoch: int
    lr: float
    lambda_eff: float
    train_loss: float
    train_acc_vs_noisy: float
    train_acc_vs_clean: float
    test_acc: float
    label_precision: float
    lid_mean: float
    csr: float
    rv_hat_mean: float

    def to_line(self) -> str:
        vals = [str(int(self.epoch))]
        for f in fields(self)[1:]:
            vals.append(format(float(getattr(self, f.name)), ".17g"))
        return ",".join(vals)


def _parse_row(line: str, lineno: int, path) -> MetricsRow:
    parts = line.split(",")
    if len(parts) != len(METRICS_COLUMNS):
        raise FormatError(f"{path}:{lineno}: expected {len(METRICS_COLUMNS)} columns, got {len(parts)}")
    try:
        epoch = int(parts[0])
        reals = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: {exc}") from None
    if any(math.isinf(v) for v in reals):
        raise FormatError(f"{path}:{lineno}: infinite metric value")
    return MetricsRow(epoch, *reals)


class MetricsWriter:
    """Streaming CSV writer; every row hits the disk before the next begins."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(METRICS_HEADER + "\n")
        self._fh.flush()
        self._last_epoch = None

    def write_row(self, row: MetricsRow) -> None:
        if self._last_epoch is not None and row.epoch <= self._last_epoch:
            raise FormatError(f"epochs must be strictly increasing: {row.epoch} after {self._last_epoch}")
        self._last_epoch = row.epoch
        self._fh.write(row.to_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_metrics_csv(rows, path) -> None:
    with MetricsWriter(path) as writer:
        for row in rows:
            writer.write_row(row)


def read_metrics_csv(path) -> list[MetricsRow]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise FormatError(f"{path}:1: bad or missing header")
    rows = []
    last_epoch = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        row = _parse_row(line, lineno, path)
        if last_epoch is not None and row.epoch <= last_epoch:
            raise FormatError(f"{path}:{lineno}: epochs not strictly increasing")
        last_epoch = row.epoch
        rows.append(row)
    return rows
