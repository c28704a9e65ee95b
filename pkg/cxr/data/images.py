"""Grayscale PGM ingestion and the geometric augmentations used during training.

Images are float64 arrays [C, H, W] with values in [0, 1].
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import map_coordinates

from cxr.errors import ConfigurationError, DatasetError, OutputWriteError

PGM_MAGIC = b"P5"
PGM_MAXVAL = 255
CHANNELS = 3
HEADER_BYTES = 512


def _header_fields(header: bytes) -> list[bytes]:
    """Width, height and maxval tokens of a PNM header; `#` comments are skipped."""
    tokens: list[bytes] = []
    for line in header[len(PGM_MAGIC) :].splitlines():
        tokens.extend(line.split(b"#", 1)[0].split())
        if len(tokens) >= 3:
            break
    return tokens[:3]


def read_pgm(path: Path) -> np.ndarray:
    """Decode an 8-bit binary PGM into [3, H, W], scaled by 1/255 and replicated to 3 channels."""
    try:
        with path.open("rb") as handle:
            header = handle.read(HEADER_BYTES)
    except OSError as exc:
        raise DatasetError(f"Cannot read image '{path}': {exc}") from exc
    magic = header[: len(PGM_MAGIC)]
    if magic != PGM_MAGIC:
        raise DatasetError(f"'{path}' is not a binary PGM (expected magic P5, got {magic!r})")
    fields = _header_fields(header)
    if len(fields) == 3 and fields[2].isdigit() and int(fields[2]) != PGM_MAXVAL:
        raise DatasetError(f"'{path}' must have maxval {PGM_MAXVAL}, got {int(fields[2])}")

    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "L":
                raise DatasetError(f"'{path}' must be 8-bit grayscale, got mode {img.mode}")
            pixels = np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DatasetError(f"Malformed PGM header in '{path}': {exc}") from exc

    gray = pixels / PGM_MAXVAL
    return np.repeat(gray[None, :, :], CHANNELS, axis=0)


def write_pgm(image: np.ndarray, path: Path) -> None:
    """Store the first channel as an 8-bit binary PGM (values rounded to the nearest level)."""
    gray = image[0] if image.ndim == 3 else image
    levels = np.clip(np.rint(gray * 255.0), 0, 255).astype(np.uint8)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(levels).save(path, format="PPM")
    except OSError as exc:
        raise OutputWriteError(str(path), str(exc)) from exc


def resize(image: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resize of every channel to target x target, corners aligned."""
    if target < 8:
        raise ConfigurationError(f"resize target must be >= 8, got {target}")
    channels, height, width = image.shape
    if height == target and width == target:
        return image.copy()

    def axis_coords(size: int) -> np.ndarray:
        if size == 1:
            return np.zeros(target)
        return np.arange(target) * ((size - 1) / (target - 1))

    rows, cols = np.meshgrid(axis_coords(height), axis_coords(width), indexing="ij")
    out = np.empty((channels, target, target))
    for c in range(channels):
        out[c] = map_coordinates(image[c], [rows, cols], order=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def random_horizontal_flip(image: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"flip probability must lie in [0, 1], got {p}")
    if rng.random() < p:
        return image[:, :, ::-1].copy()
    return image


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise (as displayed, rows pointing down) about the image centre.

    Each output pixel samples the source bilinearly; samples outside the source are 0.
    """
    if degrees == 0.0:
        return image.copy()
    channels, height, width = image.shape
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0

    ys, xs = np.indices((height, width), dtype=np.float64)
    dy, dx = ys - cy, xs - cx
    src_x = cx + cos_t * dx - sin_t * dy
    src_y = cy + sin_t * dx + cos_t * dy

    out = np.empty_like(image)
    for c in range(channels):
        out[c] = map_coordinates(image[c], [src_y, src_x], order=1, mode="constant", cval=0.0)
    return np.clip(out, 0.0, 1.0)


def random_rotation(
    image: np.ndarray,
    max_degrees: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Rotate by an angle drawn uniformly from [-max_degrees, +max_degrees]."""
    if not 0.0 <= max_degrees <= 180.0:
        raise ConfigurationError(f"rotation range must lie in [0, 180], got {max_degrees}")
    angle = rng.uniform(-max_degrees, max_degrees)
    if max_degrees == 0.0:
        return image
    return rotate(image, angle)


def apply_augmentation(
    image: np.ndarray,
    rng: np.random.Generator,
    flip_p: float = 0.5,
    max_degrees: float = 15.0,
) -> np.ndarray:
    """Training-time pipeline: horizontal flip, then rotation."""
    return random_rotation(random_horizontal_flip(image, flip_p, rng), max_degrees, rng)
