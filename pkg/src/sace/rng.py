"""Deterministic seed derivation.

Every random quantity in the package flows from one master seed through
named streams, so partial reruns (a single replication, a single fold)
reproduce exactly what a full run would have used.
"""

import numpy as np

# Fixed stream tags; never renumber.
STREAM_SIMULATE = 1
STREAM_CV = 2
STREAM_TRACK = 3
STREAM_PANEL = 4
STREAM_PROBE = 5


def seed_sequence(master_seed, *path) -> np.random.SeedSequence:
    """SeedSequence for (master_seed, *path); path entries are small ints."""
    return np.random.SeedSequence([int(master_seed)] + [int(x) for x in path])


def rng_for(master_seed, *path) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *path))
