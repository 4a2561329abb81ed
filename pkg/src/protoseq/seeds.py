"""Deterministic RNG derivation.

Every random draw in the package flows from a single integer seed through
``numpy.random.SeedSequence`` so that identical configurations reproduce
bit-for-bit. Each consumer mixes in a fixed stream tag (below) plus its own
indices (epoch, batch, sample, ...) so no two consumers share a stream.
"""
from __future__ import annotations

import numpy as np

ENCODER_INIT = 1
DECODER_INIT = 2
EPOCH_SHUFFLE = 3
CLUSTERING = 4
NEGATIVE_SAMPLING = 5
SYNTH_DATA = 6
PROBE_INIT = 7
SPLIT = 8


def spawn_rng(*parts: int) -> np.random.Generator:
    """Generator seeded from a tuple of non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


def derive_seed(*parts: int) -> int:
    """Collapse a tuple of integers into one stable 64-bit seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])
