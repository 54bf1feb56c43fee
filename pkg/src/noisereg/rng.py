"""Seeded random-number streams.

A stream is identified by (seed, stream_id): two streams built from the
same pair produce bit-identical draw sequences, and streams with distinct
ids are statistically independent. Sub-streams derived with child() stay
reproducible, so e.g. training draws and diagnostic draws never interfere.
"""

from __future__ import annotations

import numpy as np


class RngStream:
    """A deterministic random stream backed by a numpy Generator."""

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        key = (self.stream_id,) + self._path
        self._gen = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    @property
    def gen(self) -> np.random.Generator:
        """The underlying generator; draws advance this stream."""
        return self._gen

    def child(self, index: int) -> "RngStream":
        """Derive an independent sub-stream; deterministic in (self, index)."""
        return RngStream(self.seed, self.stream_id, self._path + (int(index),))

    # Thin passthroughs for the draw kinds the toolkit uses.
    def normal(self, size=None, scale=1.0):
        return self._gen.normal(0.0, scale, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def random(self, size=None):
        return self._gen.random(size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"
