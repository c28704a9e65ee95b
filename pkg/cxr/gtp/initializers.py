"""Parameter initialisation shared by every layer."""

from __future__ import annotations

import math

import numpy as np


def uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Draw from uniform(-sqrt(1/fan_in), +sqrt(1/fan_in))."""
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)
