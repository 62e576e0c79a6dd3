"""SplitMix64 pseudo-random stream.

The generator is counter based: output ``k`` of the stream seeded with ``s`` is
``mix(s + (k + 1) * GAMMA)``.  Any slice of the stream can therefore be
produced independently, which is what makes chunked sampling bit-identical to
sequential sampling.
"""
from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    # wrap-around multiplication is the intended mod 2**64 arithmetic
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Return outputs ``offset .. offset + n - 1`` of the stream as uint64."""
    k = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK) + k * GAMMA
        return _mix(state)


def uniform_open(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Doubles strictly inside (0, 1) built from the top 53 bits."""
    bits = splitmix64(seed, n, offset) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def derive_seed(seed: int, stream: int) -> int:
    """Seed of an independent child stream (first output of a mixed counter)."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) ^ _mix(np.uint64(stream & _MASK) * GAMMA + GAMMA)
    return int(_mix(np.asarray(z, dtype=np.uint64)))


class SplitMix64:
    """Stateful wrapper that hands out consecutive blocks of the stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.position = 0

    def next_uint64(self, n: int) -> np.ndarray:
        out = splitmix64(self.seed, n, self.position)
        self.position += n
        return out

    def uniform(self, n: int) -> np.ndarray:
        out = uniform_open(self.seed, n, self.position)
        self.position += n
        return out
