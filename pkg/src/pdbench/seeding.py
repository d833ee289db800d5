"""Deterministic seed derivation for every stochastic fit.

Seeds are derived, never shared: each (stage, model, window, grid point)
coordinate hashes into its own integer seed through SeedSequence, so
results are independent of execution order and worker count.
"""
from __future__ import annotations

import numpy as np

STAGE_GENERATE = 0
STAGE_TUNE = 1
STAGE_COMPARE = 2
STAGE_COMBINE = 3


def derive_seed(*parts: int) -> int:
    """Collapse an integer coordinate tuple into one 64-bit seed."""
    entropy = tuple(int(p) for p in parts)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def derive_rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(tuple(int(p) for p in parts)))
