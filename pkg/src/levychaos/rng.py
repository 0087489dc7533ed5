"""Reproducible random streams.

Every draw comes from a Philox-4x64 counter-based generator whose key is
derived by ``numpy.random.SeedSequence(seed, spawn_key=(lane, replica, band))``.
The stream for a given ``(seed, replica, band, lane)`` is therefore fixed
regardless of how replicas are scheduled across workers.
"""
from __future__ import annotations

import numpy as np

__all__ = ["stream", "LANE_LHS", "LANE_RHS", "LANE_BAND", "LANE_BOOT"]

LANE_LHS = 0
LANE_RHS = 1
LANE_BAND = 2
LANE_BOOT = 7


def stream(seed: int, replica: int = 0, band: int = 0, lane: int = 0) -> np.random.Generator:
    if seed is None:
        raise ValueError("an explicit seed is required")
    if min(seed, replica, band, lane) < 0:
        raise ValueError("seed and stream indices must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(lane), int(replica), int(band)))
    return np.random.Generator(np.random.Philox(ss))
