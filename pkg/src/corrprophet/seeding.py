"""Hierarchical, schedule-independent seed derivation.

Every random stream is addressed by ``(master seed, *keys)`` so a draw
never depends on how many other draws happened before it or on which
worker ran it.
"""

import numpy as np

BLOCK_SIZE = 4096

# stream tags
Y_DRAWS = 0
INCLUSION = 1
CONSTRUCTION = 2
ASSIGNMENT = 3
DISCARD = 4
ORACLE_MC = 5
AUGMENTED = 6
OUTER = 7


def _entropy(seed):
    if seed is None:
        return 0
    seed = int(seed)
    if seed < 0:
        raise ValueError("seeds must be nonnegative integers")
    return seed


def rng_for(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in keys))
    )


def derive_seed(seed, *keys) -> int:
    """A child integer seed; ``rng_for(derive_seed(s, k))`` is a fresh stream."""
    ss = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def blocks(start: int, count: int, block_size: int = BLOCK_SIZE):
    """Yield (block id, lo, hi) covering draw indices [start, start + count)."""
    stop = start + count
    index = start
    while index < stop:
        block = index // block_size
        lo = index - block * block_size
        hi = min(block_size, stop - block * block_size)
        yield block, lo, hi
        index = block * block_size + hi
