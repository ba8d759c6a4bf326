"""
Deterministic seed schedule.

Every random object in the package is drawn from a ``numpy`` generator whose
seed is obtained by mixing a master seed with one or more stream indices
through SplitMix64. The mix is a bijection on 64-bit words, so two different
stream indices under the same master seed can never collide, and the result
is identical on every platform.
"""
from __future__ import annotations

import numpy as np

from config import U64_MASK

_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance the state by the golden gamma and finalize."""
    z = (int(x) + _GOLDEN_GAMMA) & U64_MASK
    z = ((z ^ (z >> 30)) * _MIX_1) & U64_MASK
    z = ((z ^ (z >> 27)) * _MIX_2) & U64_MASK
    return z ^ (z >> 31)


def derive_round_seed(master_seed: int, round: int) -> int:
    """
    Seed of the sketch operator used in ``round``.

    ``splitmix64`` is a bijection, hence ``splitmix64(master) ^ round`` differs
    for every round and so does the outer mix.
    """
    if master_seed < 0 or round < 0:
        raise ValueError(f"seeds must be non-negative, got {master_seed=} {round=}")
    return splitmix64(splitmix64(master_seed & U64_MASK) ^ (round & U64_MASK))


def derive_seed(master_seed: int, *streams: int) -> int:
    """Fold any number of stream indices into ``master_seed``."""
    seed = master_seed & U64_MASK
    for s in streams:
        seed = derive_round_seed(seed, s)
    return seed


def rng_for(master_seed: int, *streams: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *streams)))
