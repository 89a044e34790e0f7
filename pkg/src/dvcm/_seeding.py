"""Deterministic RNG streams keyed by (seed, purpose, index)."""

import numpy as np

PARTITION = 1
CHAIN = 2
INDUCING = 3
REPLICATE = 4
SIMULATION = 5


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit integer seed determined by ``seed`` and ``keys``."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
