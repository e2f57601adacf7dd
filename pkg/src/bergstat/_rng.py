"""Seeded, splittable random streams.

Every stream is a Philox counter-based generator keyed by a 64-bit seed.
Independent jobs derive their seeds from a base seed by adding multiples of
the 64-bit golden-ratio increment, so parallel runs never share state.
"""

import numpy as np

GOLDEN_64 = 0x9E3779B97F4A7C15
_MASK_64 = (1 << 64) - 1


def derive_seed(base_seed, index):
    """Seed of job ``index`` derived from ``base_seed`` (mod 2**64)."""
    return (int(base_seed) + int(index) * GOLDEN_64) & _MASK_64


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK_64))
