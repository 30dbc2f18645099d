"""Splittable, counter-based random streams.

All stochastic code in this package draws from numpy Philox generators keyed
by ``(seed, index)``.  ``child_stream(seed, t)`` is a pure function, so trial
``t`` produces the same draws no matter how trials are partitioned across
workers or in what order they run.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def child_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for child ``index`` of the stream ``seed``."""
    key = ((int(seed) & _MASK64) << 64) | (int(index) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def mix(seed: int, *indices: int) -> int:
    """Derive a 64-bit sub-seed from a seed and any number of indices.

    SplitMix64 finalizer applied per component; pure and order-sensitive.
    """
    z = int(seed) & _MASK64
    for ix in indices:
        z = (z + 0x9E3779B97F4A7C15 + (int(ix) & _MASK64)) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
    return z
