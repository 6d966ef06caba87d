# walks/rng.py
"""
Counter-based uniforms: u(seed, walker, step) is a pure function, so a walker's
trajectory is the same whether it runs alone, in a batch, or on another thread.

The hash is three rounds of the splitmix64 finalizer (seed, then walker, then step).
The int version and the numpy version produce identical bits.
"""
from __future__ import annotations

import numpy as np

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
_GAMMA = 0x9E37_79B9_7F4A_7C15
_M1 = 0xBF58_476D_1CE4_E5B9
_M2 = 0x94D0_49BB_1331_11EB
_INV53 = 1.0 / (1 << 53)


def mix64(x: int) -> int:
    z = (x + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64) + np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def walker_key(seed: int, walker: int) -> int:
    return mix64(mix64(seed & MASK64) ^ (walker & MASK64))


def walker_keys(seed: int, walkers: np.ndarray) -> np.ndarray:
    return mix64_array(np.uint64(mix64(seed & MASK64)) ^ np.asarray(walkers, dtype=np.uint64))


def uniform(key: int, step: int) -> float:
    return (mix64(key ^ (step & MASK64)) >> 11) * _INV53


def uniforms(keys: np.ndarray, step: int) -> np.ndarray:
    bits = mix64_array(keys ^ np.uint64(step & MASK64))
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53


class CounterRNG:
    """Scalar view of the stream for one walker."""

    __slots__ = ("seed", "walker", "key")

    def __init__(self, seed: int, walker: int = 0):
        self.seed = seed
        self.walker = walker
        self.key = walker_key(seed, walker)

    def uniform(self, step: int) -> float:
        return uniform(self.key, step)

    def choice(self, step: int, n: int) -> int:
        return int(self.uniform(step) * n)

    def __repr__(self):
        return f"CounterRNG(seed={self.seed}, walker={self.walker})"
