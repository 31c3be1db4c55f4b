"""Deterministic fan-out of the master seed into per-stage seeds.

Each pipeline stage draws from its own counter-indexed stream so stages
can be rerun or parallelized independently without perturbing each
other's randomness.
"""

from __future__ import annotations

import numpy as np

STAGES = {
    "data": 0,
    "train": 1,
    "sample": 2,
    "lime": 3,
    "bootstrap": 4,
    "lrt": 5,
    "point": 6,
}


def stage_seed(master_seed: int, stage: str) -> int:
    """63-bit seed for a named stage, derived by counter-based split."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {sorted(STAGES)}")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(STAGES[stage],))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def stage_rng(master_seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(master_seed, stage))
