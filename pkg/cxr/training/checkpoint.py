"""Binary checkpoint format.

Layout (little-endian):
    b"GTPC" | u32 version | u32 header length | JSON header
    then per tensor: u32 name length | name | u8 rank | u32 dim * rank | f32 data
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Optional

import numpy as np
from loguru import logger
from pydantic import ValidationError

from cxr.config.schema import ModelConfig
from cxr.errors import CheckpointFormatError, ConfigurationError, OutputWriteError
from cxr.gtp.head import BatchNormState
from cxr.gtp.network import GtpNetwork, build_network

MAGIC = b"GTPC"
FORMAT_VERSION = 1
RUNNING_MEAN = "bn.running_mean"
RUNNING_VAR = "bn.running_var"
_STORED_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    model: ModelConfig
    tensors: dict[str, np.ndarray]
    seed: int
    class_counts: Optional[tuple[int, ...]] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def header(self) -> dict[str, Any]:
        return {
            "model": self.model.model_dump(mode="json"),
            "seed": self.seed,
            "class_counts": list(self.class_counts) if self.class_counts is not None else None,
            "metadata": self.metadata,
        }


def checkpoint_from_network(
    net: GtpNetwork,
    seed: int,
    class_counts: Optional[tuple[int, ...]] = None,
    metadata: Optional[dict[str, Any]] = None,
) -> Checkpoint:
    tensors = {name: t.values.astype(_STORED_DTYPE) for name, t in net.params.items()}
    if net.config.use_gtp:
        tensors[RUNNING_MEAN] = net.batch_norm.running_mean.astype(_STORED_DTYPE)
        tensors[RUNNING_VAR] = net.batch_norm.running_var.astype(_STORED_DTYPE)
    return Checkpoint(
        model=net.config,
        tensors=tensors,
        seed=seed,
        class_counts=class_counts,
        metadata=dict(metadata or {}),
    )


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> None:
    header = json.dumps(checkpoint.header(), sort_keys=True).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as handle:
            handle.write(MAGIC)
            handle.write(struct.pack("<II", FORMAT_VERSION, len(header)))
            handle.write(header)
            for name, values in checkpoint.tensors.items():
                _write_tensor(handle, name, values)
    except OSError as exc:
        raise OutputWriteError(str(path), str(exc)) from exc
    logger.debug("Checkpoint written to {} ({} tensors)", path, len(checkpoint.tensors))


def _write_tensor(handle: BinaryIO, name: str, values: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(values, dtype=_STORED_DTYPE)
    handle.write(struct.pack("<I", len(encoded)))
    handle.write(encoded)
    handle.write(struct.pack("<B", array.ndim))
    handle.write(struct.pack(f"<{array.ndim}I", *array.shape))
    handle.write(array.tobytes())


class _Reader:
    def __init__(self, data: bytes, path: Path) -> None:
        self.data, self.offset, self.path = data, 0, path

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise CheckpointFormatError(f"'{self.path}' is truncated while reading {what}")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def exhausted(self) -> bool:
        return self.offset == len(self.data)


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointFormatError(f"Cannot read checkpoint '{path}': {exc}") from exc

    reader = _Reader(data, path)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointFormatError(f"'{path}' is not a checkpoint (bad magic)")
    version, header_len = reader.unpack("<II", "version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"'{path}' has format version {version}, expected {FORMAT_VERSION}"
        )
    try:
        header = json.loads(reader.take(header_len, "header").decode("utf-8"))
        model = ModelConfig.model_validate(header["model"])
        seed = int(header["seed"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
        raise CheckpointFormatError(f"'{path}' has an invalid header: {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    while not reader.exhausted:
        (name_len,) = reader.unpack("<I", "tensor name length")
        name = reader.take(name_len, "tensor name").decode("utf-8", errors="replace")
        (rank,) = reader.unpack("<B", f"rank of '{name}'")
        dims = reader.unpack(f"<{rank}I", f"dims of '{name}'") if rank else ()
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(count * _STORED_DTYPE.itemsize, f"data of '{name}'")
        if name in tensors:
            raise CheckpointFormatError(f"'{path}' stores tensor '{name}' twice")
        tensors[name] = np.frombuffer(raw, dtype=_STORED_DTYPE).reshape(dims).copy()

    counts = header.get("class_counts")
    return Checkpoint(
        model=model,
        tensors=tensors,
        seed=seed,
        class_counts=tuple(int(c) for c in counts) if counts is not None else None,
        metadata=dict(header.get("metadata") or {}),
    )


def restore_network(checkpoint: Checkpoint) -> GtpNetwork:
    """Rebuild the network its hyperparameters describe and load every stored tensor.

    Raises CheckpointFormatError when any tensor is missing, unexpected or mis-shaped.
    """
    net = build_network(checkpoint.model, checkpoint.seed)
    stored = dict(checkpoint.tensors)
    running: dict[str, np.ndarray] = {}
    if checkpoint.model.use_gtp:
        for key in (RUNNING_MEAN, RUNNING_VAR):
            if key not in stored:
                raise CheckpointFormatError(f"checkpoint lacks BatchNorm statistic '{key}'")
            running[key] = stored.pop(key).astype(np.float64)
            if running[key].shape != net.batch_norm.running_mean.shape:
                raise CheckpointFormatError(
                    f"'{key}' has dims {running[key].shape}, "
                    f"expected {net.batch_norm.running_mean.shape}"
                )
    try:
        net.params.load({name: values.astype(np.float64) for name, values in stored.items()})
    except ConfigurationError as exc:
        raise CheckpointFormatError(f"checkpoint does not fit its hyperparameters: {exc}") from exc
    if running:
        net.batch_norm = BatchNormState(
            running[RUNNING_MEAN],
            running[RUNNING_VAR],
            momentum=checkpoint.model.bn_momentum,
            epsilon=checkpoint.model.bn_epsilon,
        )
    return net


def load_network(path: Path) -> tuple[GtpNetwork, Checkpoint]:
    checkpoint = load_checkpoint(path)
    return restore_network(checkpoint), checkpoint
