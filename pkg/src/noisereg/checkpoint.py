"""Versioned binary model checkpoints; write-then-read is bit-exact."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .nn import ACTIVATIONS, MlpModel

CHECKPOINT_MAGIC = b"NRCP"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: MlpModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        fh.write(struct.pack("<Bd", ACTIVATIONS.index(model.hidden_activation), model.dropout_rate))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype=np.float64).tobytes())
            fh.write(np.ascontiguousarray(b, dtype=np.float64).tobytes())


def _read_exact(fh, count, path, what):
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(f"{path}: truncated while reading {what} at offset {fh.tell() - len(data)}")
    return data


def load_checkpoint(path) -> MlpModel:
    path = Path(path)
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path, "magic") != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad magic at offset 0 (want {CHECKPOINT_MAGIC!r})")
        version, n_dims = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        if n_dims < 2:
            raise FormatError(f"{path}: checkpoint lists {n_dims} layer dims")
        dims = list(struct.unpack(f"<{n_dims}I", _read_exact(fh, 4 * n_dims, path, "layer dims")))
        act_idx, dropout = struct.unpack("<Bd", _read_exact(fh, 9, path, "model attributes"))
        if act_idx >= len(ACTIVATIONS):
            raise FormatError(f"{path}: unknown activation tag {act_idx}")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(_read_exact(fh, fan_in * fan_out * 8, path, "weights"), dtype=np.float64)
            b = np.frombuffer(_read_exact(fh, fan_out * 8, path, "biases"), dtype=np.float64)
            weights.append(w.reshape(fan_in, fan_out).copy())
            biases.append(b.copy())
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after payload")
    return MlpModel(dims, weights, biases, ACTIVATIONS[act_idx], dropout)
