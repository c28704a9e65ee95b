"""Counter-based random streams derived from one user seed."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    INIT = 0
    SPLIT = 1
    SHUFFLE = 2
    AUGMENT = 3
    SYNTHETIC = 4


def derive_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, stream, keys...); creation order does not matter."""
    entropy = [int(seed), int(stream), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
