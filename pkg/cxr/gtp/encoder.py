"""Compact convolutional image encoder F(x | theta_f)."""

from __future__ import annotations

import numpy as np

from cxr.errors import ShapeError
from cxr.gtp.initializers import uniform_fan_in
from cxr.numerics import ParameterStore, Tensor, avg_pool2d, conv2d, linear, relu

IN_CHANNELS = 3
KERNEL_SIZE = 3
MIN_IMAGE_SIZE = 8
PREFIX = "encoder"


def init_encoder(
    store: ParameterStore,
    rng: np.random.Generator,
    channels: tuple[int, ...],
    feature_dim: int,
) -> None:
    """Register conv{i}.weight/bias for each stage plus proj.weight/bias."""
    in_channels = IN_CHANNELS
    for stage, out_channels in enumerate(channels, start=1):
        fan_in = in_channels * KERNEL_SIZE * KERNEL_SIZE
        store.add(
            f"{PREFIX}.conv{stage}.weight",
            uniform_fan_in(rng, (out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE), fan_in),
        )
        store.add(f"{PREFIX}.conv{stage}.bias", np.zeros(out_channels))
        in_channels = out_channels
    store.add(f"{PREFIX}.proj.weight", uniform_fan_in(rng, (in_channels, feature_dim), in_channels))
    store.add(f"{PREFIX}.proj.bias", np.zeros(feature_dim))


def encoder_stages(store: ParameterStore) -> int:
    stages = 0
    while f"{PREFIX}.conv{stages + 1}.weight" in store:
        stages += 1
    return stages


def cnn_encode(images: Tensor, store: ParameterStore) -> Tensor:
    """Map images [b, 3, H, W] to features [b, d_c].

    Each stage is a 3x3 'same' convolution with bias, ReLU and 2x2 average pooling; a global
    average pool and a linear projection follow.
    """
    if images.ndim != 4 or images.dims[1] != IN_CHANNELS:
        raise ShapeError(f"encoder expects images [b, 3, H, W], got {images.dims}")
    height, width = images.dims[2], images.dims[3]
    if min(height, width) < MIN_IMAGE_SIZE:
        raise ShapeError(
            f"encoder needs images of at least {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}, "
            f"got {height}x{width}"
        )

    x = images
    for stage in range(1, encoder_stages(store) + 1):
        bias = store[f"{PREFIX}.conv{stage}.bias"]
        x = conv2d(x, store[f"{PREFIX}.conv{stage}.weight"]) + bias.reshape(1, bias.dims[0], 1, 1)
        x = avg_pool2d(relu(x))

    pooled = x.mean(axis=(2, 3))
    return linear(pooled, store[f"{PREFIX}.proj.weight"], store[f"{PREFIX}.proj.bias"])
