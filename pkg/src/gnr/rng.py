"""Seeded random streams with a draw counter."""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")
_MASK64 = (1 << 64) - 1


class RngStream:
    """A reproducible stream: same seed and same call order give the same draws."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def spawn(self, *key: int) -> "RngStream":
        """Child stream keyed on this seed; does not advance the parent."""
        ss = np.random.SeedSequence([self.seed, *[int(k) & _MASK64 for k in key]])
        return RngStream(int(ss.generate_state(1, np.uint64)[0]))

    def uniform(self, shape=()) -> np.ndarray:
        self.counter += 1
        return self._gen.random(shape)

    def normal(self, shape=(), sigma: float = 1.0) -> np.ndarray:
        self.counter += 1
        return self._gen.normal(0.0, sigma, shape)

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        self.counter += 1
        return int(self._gen.integers(low, high))

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice from an empty sequence")
        return items[self.integers(0, len(items))]

    def permutation(self, n: int) -> np.ndarray:
        self.counter += 1
        return self._gen.permutation(n)
