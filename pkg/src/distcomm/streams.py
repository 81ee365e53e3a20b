"""Deterministic random-stream derivation from a single 64-bit seed.

All randomness in the library flows through generators produced here, so a
run is fully reproducible from one master seed.  Independent sub-streams are
derived with ``numpy.random.SeedSequence`` spawn keys, which is stable across
platforms and numpy versions.
"""
from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Return a generator for the sub-stream identified by ``path``.

    Distinct paths yield statistically independent streams; the same
    (seed, path) pair always yields the same stream.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse a (seed, path) pair into a fresh 64-bit integer seed."""
    ss = np.random.SeedSequence(seed, spawn_key=path)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
