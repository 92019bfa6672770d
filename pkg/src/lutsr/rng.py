"""Deterministic pseudo-random streams shared by weight init and test fixtures.

SplitMix64 is used because its output is a pure function of 64-bit integer
arithmetic, so the same seed yields the same stream on every platform and
numpy version. Floats are produced by the usual 53-bit division.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Stateful SplitMix64 stream over 64-bit integers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        # 53-bit division, uniform in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Integer in [0, n) by float scaling; fine for small n."""
        return int(self.next_float() * n)

    def fill_u64(self, n: int) -> np.ndarray:
        """Vectorized draw of the next n outputs (same values as n next_u64 calls)."""
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            s = np.uint64(self._state) + steps * np.uint64(_GAMMA)
            z = (s ^ (s >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = int(s[-1])
        return z

    def fill_floats(self, n: int) -> np.ndarray:
        return (self.fill_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def fill_bytes(self, n: int) -> np.ndarray:
        words = self.fill_u64((n + 7) // 8)
        return words.astype("<u8").view(np.uint8)[:n].copy()
