"""Counter-based random streams keyed by (seed, purpose, index)."""
import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def make_rng(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for one (seed, purpose, index) triple.

    Streams never depend on how many draws other purposes consumed, so
    results are stable across thread counts and call orders.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, purpose_key(purpose), int(index)])
    return np.random.Generator(np.random.Philox(ss))
