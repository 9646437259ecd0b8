"""Deterministic random numbers with a portable seed contract.

The generator is counter-based splitmix64: draw number i (1-based) of the
stream seeded with s is mix64(s + i * 0x9E3779B97F4A7C15) where mix64 is
the usual xor-shift/multiply finalizer. Two generators built from the same
seed therefore emit identical sequences on any platform, and a draw's value
depends only on (seed, position), never on batch shapes.

Uniform doubles take the top 53 bits of a raw draw; normals use one
Box-Muller pair (two raw draws) per value.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded stream of uniform/normal draws. Single-owner: do not share
    one instance across threads."""

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._count = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GAMMA)

    def uniform(self, *shape: int) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) / _TWO53
        return u.reshape(shape) if shape else float(u[0])

    def normal(self, *shape: int) -> np.ndarray:
        """Standard normal draws (Box-Muller)."""
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        raw = self._raw(2 * pairs)
        # shift into (0, 1] so log never sees zero
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape) if shape else float(z[0])

    def integers(self, low: int, high: int, size: int = 1) -> np.ndarray:
        """Integer draws in [low, high), from the uniform stream."""
        u = self.uniform(size)
        return (low + np.floor(u * (high - low))).astype(np.int64)
