"""Checkpoint format round trips and rejection of damaged files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest

from cxr.config.schema import EdgeMode, Mode, ModelConfig
from cxr.errors import CheckpointFormatError
from cxr.gtp import build_network, forward_network
from cxr.numerics import Tensor
from cxr.training import (
    Checkpoint,
    checkpoint_from_network,
    load_checkpoint,
    load_network,
    restore_network,
    save_checkpoint,
)

SMALL = ModelConfig(
    encoder_channels=(2, 2, 2),
    feature_dim=4,
    hidden_dim=8,
    heads=2,
    num_blocks=2,
    edge_mode=EdgeMode.POSITIONAL,
    edge_dim=2,
    max_batch=6,
)


def _perturbed_network(config: ModelConfig = SMALL, seed: int = 3):
    net = build_network(config, seed=seed)
    rng = np.random.default_rng(seed)
    for _, tensor in net.params.items():
        tensor.values[...] = tensor.values + 0.1 * rng.normal(size=tensor.dims)
    if config.use_gtp:
        width = net.batch_norm.running_mean.shape[0]
        net.batch_norm.running_mean = rng.normal(size=width)
        net.batch_norm.running_var = rng.uniform(0.5, 2.0, size=width)
    return net


def _saved(tmp_path: Path, config: ModelConfig = SMALL) -> tuple[Path, object]:
    net = _perturbed_network(config)
    path = tmp_path / "model.ckpt"
    save_checkpoint(
        checkpoint_from_network(net, 3, (10, 20, 30, 40), {"epoch": 2, "loss": "balce"}), path
    )
    return path, net


def test_round_trip_is_exact_at_single_precision(tmp_path: Path) -> None:
    path, net = _saved(tmp_path)
    restored, checkpoint = load_network(path)
    assert restored.params.names() == net.params.names()
    for name, tensor in net.params.items():
        expected = tensor.values.astype(np.float32).astype(np.float64)
        assert np.array_equal(restored.params[name].values, expected), name
    assert np.array_equal(
        restored.batch_norm.running_var,
        net.batch_norm.running_var.astype(np.float32).astype(np.float64),
    )
    assert checkpoint.model == SMALL
    assert checkpoint.seed == 3
    assert checkpoint.class_counts == (10, 20, 30, 40)
    assert checkpoint.metadata == {"epoch": 2, "loss": "balce"}


def test_restored_network_predicts_like_the_rounded_original(tmp_path: Path) -> None:
    path, net = _saved(tmp_path)
    restored, _ = load_network(path)
    for _, tensor in net.params.items():
        tensor.values[...] = tensor.values.astype(np.float32)
    net.batch_norm.running_mean = net.batch_norm.running_mean.astype(np.float32).astype(float)
    net.batch_norm.running_var = net.batch_norm.running_var.astype(np.float32).astype(float)
    images = Tensor(np.random.default_rng(0).uniform(size=(3, 3, 16, 16)))
    assert np.array_equal(
        forward_network(images, restored, Mode.EVAL).values,
        forward_network(images, net, Mode.EVAL).values,
    )


def test_saving_twice_gives_identical_bytes(tmp_path: Path) -> None:
    path, _ = _saved(tmp_path)
    again = tmp_path / "again.ckpt"
    save_checkpoint(load_checkpoint(path), again)
    assert path.read_bytes() == again.read_bytes()


def test_baseline_checkpoint_has_no_batch_norm_statistics(tmp_path: Path) -> None:
    path, _ = _saved(tmp_path, SMALL.model_copy(update={"use_gtp": False}))
    checkpoint = load_checkpoint(path)
    assert not any(name.startswith("bn.") for name in checkpoint.tensors)
    restored = restore_network(checkpoint)
    assert not restored.config.use_gtp


def test_bad_magic_rejected(tmp_path: Path) -> None:
    path, _ = _saved(tmp_path)
    path.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(CheckpointFormatError, match="magic"):
        load_checkpoint(path)


def test_unknown_version_rejected(tmp_path: Path) -> None:
    path, _ = _saved(tmp_path)
    data = path.read_bytes()
    path.write_bytes(data[:4] + struct.pack("<I", 99) + data[8:])
    with pytest.raises(CheckpointFormatError, match="version"):
        load_checkpoint(path)


@pytest.mark.parametrize("keep", [2, 10, -1, -7])
def test_truncated_file_rejected(tmp_path: Path, keep: int) -> None:
    path, _ = _saved(tmp_path)
    path.write_bytes(path.read_bytes()[:keep])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_missing_file_rejected(tmp_path: Path) -> None:
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_tensors_must_fit_hyperparameters(tmp_path: Path) -> None:
    path, _ = _saved(tmp_path)
    checkpoint = load_checkpoint(path)
    wider = Checkpoint(
        model=SMALL.model_copy(update={"hidden_dim": 12}),
        tensors=checkpoint.tensors,
        seed=checkpoint.seed,
    )
    with pytest.raises(CheckpointFormatError):
        restore_network(wider)

    missing = dict(checkpoint.tensors)
    missing.pop("head.weight")
    with pytest.raises(CheckpointFormatError):
        restore_network(Checkpoint(model=SMALL, tensors=missing, seed=3))

    no_stats = {k: v for k, v in checkpoint.tensors.items() if not k.startswith("bn.")}
    with pytest.raises(CheckpointFormatError):
        restore_network(Checkpoint(model=SMALL, tensors=no_stats, seed=3))


def test_invalid_header_rejected(tmp_path: Path) -> None:
    path = tmp_path / "bad.ckpt"
    header = b'{"seed": 1}'
    path.write_bytes(b"GTPC" + struct.pack("<II", 1, len(header)) + header)
    with pytest.raises(CheckpointFormatError, match="header"):
        load_checkpoint(path)
