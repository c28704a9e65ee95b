"""Synthetic, imbalanced four-class chest-film surrogate.

Every class draws a distinct pattern over a noisy background:
    silicosis  many small bright nodules
    normal     a smooth low-frequency field
    bacterial  one large diffuse opacity
    viral      an oriented streak texture
Each image depends only on (seed, class, index).
"""

from __future__ import annotations

import math

import numpy as np

from cxr import CLASS_NAMES
from cxr.config.schema import SynthConfig
from cxr.data.dataset import LabeledDataset
from cxr.seeding import Stream, derive_rng

BACKGROUND_LEVEL = 0.25

Grid = tuple[np.ndarray, np.ndarray]


def _gaussian(ys: np.ndarray, xs: np.ndarray, cy: float, cx: float, sigma: float) -> np.ndarray:
    return np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma * sigma))


def _silicosis(rng: np.random.Generator, grid: Grid, config: SynthConfig) -> np.ndarray:
    ys, xs = grid
    size = config.image_size
    low, high = config.nodule_count
    pattern = np.zeros((size, size))
    margin = 0.1 * size
    for _ in range(int(rng.integers(low, high + 1))):
        cy, cx = rng.uniform(margin, size - 1 - margin, size=2)
        sigma = rng.uniform(0.6, 1.2)
        pattern += rng.uniform(0.5, 0.7) * _gaussian(ys, xs, cy, cx, sigma)
    return pattern


def _normal(rng: np.random.Generator, grid: Grid, config: SynthConfig) -> np.ndarray:
    ys, xs = grid
    size = config.image_size
    field = np.zeros((size, size))
    for _ in range(2):
        fy, fx = rng.uniform(0.2, 1.0, size=2) / size
        phase = rng.uniform(0.0, 2.0 * math.pi)
        field += np.cos(2.0 * math.pi * (fy * ys + fx * xs) + phase)
    return 0.05 * field


def _bacterial(rng: np.random.Generator, grid: Grid, config: SynthConfig) -> np.ndarray:
    ys, xs = grid
    size = config.image_size
    cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
    sigma = config.blob_scale * size * rng.uniform(0.8, 1.2)
    return rng.uniform(0.45, 0.6) * _gaussian(ys, xs, cy, cx, sigma)


def _viral(rng: np.random.Generator, grid: Grid, config: SynthConfig) -> np.ndarray:
    ys, xs = grid
    angle = math.radians(rng.uniform(20.0, 70.0))
    frequency = config.streak_frequency * rng.uniform(0.9, 1.1)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    along = xs * math.cos(angle) + ys * math.sin(angle)
    wave = np.sin(2.0 * math.pi * frequency * along + phase)
    return 0.2 * (1.0 + wave)


_RENDERERS = (_silicosis, _normal, _bacterial, _viral)


def render_sample(config: SynthConfig, label: int, index: int) -> np.ndarray:
    """One grayscale image [3, S, S] in [0, 1]."""
    rng = derive_rng(config.seed, Stream.SYNTHETIC, label, index)
    size = config.image_size
    grid = np.indices((size, size), dtype=np.float64)
    background = BACKGROUND_LEVEL + config.noise * rng.standard_normal((size, size))
    gray = np.clip(background + _RENDERERS[label](rng, (grid[0], grid[1]), config), 0.0, 1.0)
    return np.repeat(gray[None, :, :], 3, axis=0)


def generate_synthetic(config: SynthConfig) -> LabeledDataset:
    """Render config.counts[k] images of every class k, class-major order."""
    sample_ids: list[str] = []
    images: list[np.ndarray] = []
    labels: list[int] = []
    for label, (name, count) in enumerate(zip(CLASS_NAMES, config.counts)):
        for index in range(count):
            sample_ids.append(f"{name}_{index:05d}")
            images.append(render_sample(config, label, index))
            labels.append(label)
    return LabeledDataset(
        sample_ids=tuple(sample_ids),
        images=np.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
    )
