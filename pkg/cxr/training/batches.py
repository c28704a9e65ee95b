"""Batch plans, batch assembly and a bounded prefetch queue."""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from loguru import logger

from cxr.data.dataset import LabeledDataset
from cxr.data.images import apply_augmentation
from cxr.errors import ConfigurationError
from cxr.seeding import Stream, derive_rng

MIN_TRAIN_BATCH = 2


@dataclass(frozen=True, eq=False)
class Batch:
    index: int
    sample_indices: np.ndarray
    images: np.ndarray
    labels: np.ndarray

    @property
    def size(self) -> int:
        return int(self.sample_indices.size)


@dataclass(frozen=True)
class Augmentation:
    flip_p: float = 0.5
    max_degrees: float = 15.0


def train_batch_plan(num_samples: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Per-epoch shuffled chunks; a trailing chunk smaller than 2 is dropped."""
    if batch_size < MIN_TRAIN_BATCH:
        raise ConfigurationError(f"training batch size must be >= {MIN_TRAIN_BATCH}")
    order = derive_rng(seed, Stream.SHUFFLE, epoch).permutation(num_samples)
    chunks = [order[i : i + batch_size] for i in range(0, num_samples, batch_size)]
    if chunks and chunks[-1].size < MIN_TRAIN_BATCH:
        chunks.pop()
    return chunks


def eval_batch_plan(num_samples: int, batch_size: int) -> list[np.ndarray]:
    """Dataset order, every sample kept."""
    if batch_size < 1:
        raise ConfigurationError("evaluation batch size must be >= 1")
    order = np.arange(num_samples)
    return [order[i : i + batch_size] for i in range(0, num_samples, batch_size)]


def assemble_batch(
    dataset: LabeledDataset,
    index: int,
    sample_indices: np.ndarray,
    augmentation: Optional[Augmentation] = None,
    seed: int = 0,
    epoch: int = 0,
) -> Batch:
    """Gather images and, when augmenting, transform them with the batch's own sub-seed."""
    images = dataset.images[sample_indices]
    if augmentation is not None:
        rng = derive_rng(seed, Stream.AUGMENT, epoch, index)
        images = np.stack(
            [
                apply_augmentation(img, rng, augmentation.flip_p, augmentation.max_degrees)
                for img in images
            ]
        )
    return Batch(index, sample_indices, images, dataset.labels[sample_indices])


_DONE = object()


class BatchPrefetcher:
    """Builds batches on a producer thread ahead of the consumer.

    At most `depth` finished batches wait in the queue. Batches come out in plan order and
    each is built from its own sub-seed, so results do not depend on thread timing. A
    producer exception is re-raised in the consumer.
    Use it as a context manager so the producer stops even when the consumer raises.
    """

    def __init__(
        self,
        build: Callable[[int, np.ndarray], Batch],
        plan: Sequence[np.ndarray],
        depth: int = 2,
    ) -> None:
        self._build = build
        self._plan = list(plan)
        self._queue: queue.Queue[object] = queue.Queue(maxsize=max(1, depth))
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._produce, name="batch-prefetch", daemon=True)

    def __enter__(self) -> BatchPrefetcher:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    @property
    def producer_alive(self) -> bool:
        return self._thread.is_alive()

    def _produce(self) -> None:
        try:
            for index, indices in enumerate(self._plan):
                if self._stop.is_set():
                    return
                self._put(self._build(index, indices))
        except BaseException as exc:  # noqa: BLE001 - handed to the consumer
            self._put(exc)
            return
        self._put(_DONE)

    def _put(self, item: object) -> None:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return
            except queue.Full:
                continue

    def __iter__(self) -> Iterator[Batch]:
        self._thread.start()
        try:
            while True:
                item = self._queue.get()
                if item is _DONE:
                    return
                if isinstance(item, BaseException):
                    raise item
                yield item  # type: ignore[misc]
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)
            if self._thread.is_alive():
                logger.warning("Batch prefetch thread did not stop within 5 s")
