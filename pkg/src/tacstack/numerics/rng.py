"""Counter-based random streams.

Philox keyed on (seed, stream) gives draw sequences that are identical across
runs and platforms at 64-bit precision; independent streams never share state,
so parallel workers each own one.
"""

from __future__ import annotations

import numpy as np


class Rng:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream & 0xFFFFFFFFFFFFFFFF],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream: int) -> "Rng":
        """Independent stream under the same seed."""
        return Rng(self.seed, stream)

    def fork(self) -> "Rng":
        """Child stream derived from a fresh integer draw (for nested loops)."""
        return Rng(self.seed, int(self._gen.integers(1, 2**62)))

    def normal(self, shape=(), scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def shuffle(self, x) -> None:
        self._gen.shuffle(x)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)
