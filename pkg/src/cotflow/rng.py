"""Counter-based random number streams.

Built on numpy's Philox generator so that a stream is a pure function of
(seed, substream path): identical seed and call sequence give a bitwise
identical stream, and indexed substreams let batch operations reproduce
the exact draws of the equivalent per-element calls.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

_MASK64 = (1 << 64) - 1


class Rng:
    """Seeded Philox stream with cheap, collision-free substreams."""

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)):
            raise DataError(f"rng seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "Rng":
        """Independent stream addressed by (seed, path + (index,))."""
        return Rng(self.seed, self.path + (int(index),))

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size=size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int | None = None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def choice(self, n: int, size=None, p=None) -> np.ndarray:
        return self._gen.choice(n, size=size, p=p)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path})"
