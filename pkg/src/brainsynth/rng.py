"""Deterministic, counter-based random numbers (splitmix64).

Every random quantity in this package flows from a single 64-bit seed
through the splitmix64 recurrence, so outputs are reproducible bit-for-bit
across runs, platforms, and backends.  The generator is counter-based
(output i depends only on seed and i), which makes it trivially
vectorizable and order-independent.

Recurrence for output index i (all arithmetic mod 2**64):

    z = seed + (i + 1) * 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)

Uniform doubles in [0, 1) take the top 53 bits: (z >> 11) * 2**-53.
Normal deviates are produced from uniform pairs via Box-Muller.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / (1 << 53)

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def random_u64(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Return outputs offset..offset+n-1 of the splitmix64 stream."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    with np.errstate(over="ignore"):
        idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
        z = np.uint64(seed & _MASK64) + idx * _GOLDEN
        return _mix(z)


def random_uniform(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """i.i.d. uniform float64 samples in [0, 1)."""
    bits = random_u64(seed, n, offset)
    return (bits >> np.uint64(11)).astype(np.float64) * _U53


def random_normal(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """i.i.d. standard normal samples via Box-Muller."""
    pairs = (n + 1) // 2
    u = random_uniform(seed, 2 * pairs, offset)
    u1, u2 = u[0::2], u[1::2]
    # 1 - u1 lies in (0, 1], keeping the log argument nonzero.
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n]


def derive_seed(seed: int, stream: int) -> int:
    """Independent sub-seed for a named stream of a master seed."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + np.uint64(stream & _MASK64) * _GOLDEN
        return int(_mix(z + _GOLDEN))
