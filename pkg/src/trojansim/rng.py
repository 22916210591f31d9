"""Deterministic, keyed random-number substreams.

Every stochastic stage of the simulation draws from a generator keyed by a
tuple of non-negative integers (master seed, run key, stream tag, index ...).
Identical keys give bit-identical streams on every platform, which makes
frame-level parallelism and serial execution agree exactly.
"""

from __future__ import annotations

import numpy as np

# Stream tags used by the evaluator when deriving sub-keys from a master seed.
STREAM_BASELINE = 0
STREAM_SELECT = 1
STREAM_FRAME = 2


def substream(*key: int) -> np.random.Generator:
    """Generator for the stream identified by `key` (non-negative ints)."""
    if not key:
        raise ValueError("substream key must not be empty")
    for part in key:
        if part < 0:
            raise ValueError(f"substream key parts must be >= 0, got {part}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))
