"""Portable counter-based pseudo-random generator.

Every random decision in the pipeline flows through this module so that
results are reproducible bit-for-bit from a single 64-bit seed.  The
generator is the SplitMix64 finalizer applied to ``key + i * GOLDEN`` for
counter ``i`` — a pure function of (key, counter), so streams can be
split, replayed, and generated out of order without shared state.
Platform RNGs (``random``, unseeded numpy globals, hash()) are never used.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# uint64 wraparound is intentional throughout this module
_U64_ERRSTATE = {"over": "ignore"}


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, reduced mod 2**64."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fnv1a(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(seed: int, *parts) -> int:
    """Fold ints/strings into a seed, producing an independent stream key.

    The same (seed, parts) always yields the same key; distinct parts give
    statistically unrelated keys.
    """
    h = mix64(seed)
    for part in parts:
        if isinstance(part, str):
            value = _fnv1a(part)
        else:
            value = int(part) & _MASK64
        h = mix64(h ^ mix64(value + _GOLDEN))
    return h


def _finalize_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Sequential view over the counter-based stream for one key."""

    def __init__(self, key: int):
        self.key = int(key) & _MASK64
        self.counter = 0

    def raw(self, n: int) -> np.ndarray:
        """Next n raw uint64 values."""
        with np.errstate(**_U64_ERRSTATE):
            idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
            self.counter += n
            z = np.uint64(self.key) + idx * np.uint64(_GOLDEN)
            return _finalize_array(z)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """n doubles in [low, high) with 53-bit resolution."""
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return low + u * (high - low)

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        """n ints uniform over [low, high)."""
        if high <= low:
            raise ValueError("empty integer range")
        u = self.uniform(n)
        return (low + np.floor(u * (high - low))).astype(np.int64)

    def integer(self, low: int, high: int) -> int:
        return int(self.integers(1, low, high)[0])

    def chance(self, p: float) -> bool:
        return bool(self.uniform(1)[0] < p)

    def choice(self, seq):
        return seq[self.integer(0, len(seq))]

    def normal(self, n: int, mean: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        """n Gaussian doubles via Box-Muller on stream uniforms."""
        half = (n + 1) // 2
        u1 = (self.raw(half) >> np.uint64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * (2.0 ** -53)  # (0, 1], keeps log finite
        u2 = (self.raw(half) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return mean + sigma * out

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) via sort of random keys."""
        keys = self.raw(n)
        return np.argsort(keys, kind="stable")
