import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_rng(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """
    Counter-based generator for one purpose of a run

    Args:
        seed: the run's single config seed
        purpose: label of the consumer, e.g. 'mixer', 'shuffle', 'sim-noise'
        keys: further non-negative integers, e.g. domain index or step

    Returns:
        Philox-backed Generator; the same (seed, purpose, keys) always yields the same stream
    """
    spawn_key = (zlib.crc32(purpose.encode('utf-8')), *(int(key) for key in keys))
    sequence = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))
