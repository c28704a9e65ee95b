"""Labelled image collections: loading, counting and the stratified 4:1 split."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from loguru import logger

from cxr import CLASS_NAMES, NUM_CLASSES
from cxr.data.images import read_pgm, resize, write_pgm
from cxr.errors import DatasetError, OutputWriteError
from cxr.losses import ClassCounts
from cxr.seeding import Stream, derive_rng

LABELS_FILE = "labels.csv"
LABELS_HEADER = ["filename", "class"]
MIN_PER_CLASS = 5
TRAIN_NUMERATOR, SPLIT_DENOMINATOR = 4, 5


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Images [N, 3, H, W] in [0, 1] with labels and ids sharing one order."""

    sample_ids: tuple[str, ...]
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.sample_ids)
        if self.images.ndim != 4 or self.images.shape[0] != n or self.images.shape[1] != 3:
            raise DatasetError(f"images must be [{n}, 3, H, W], got {self.images.shape}")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise DatasetError(f"{n} images but labels of shape {labels.shape}")
        if n and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise DatasetError(f"labels must lie in 0..{NUM_CLASSES - 1}")
        if not np.isfinite(self.images).all():
            raise DatasetError("images contain non-finite values")
        if len(set(self.sample_ids)) != n:
            raise DatasetError("sample ids must be unique")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.images.shape[2], self.images.shape[3]

    def counts_per_class(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.labels, minlength=NUM_CLASSES))

    def subset(self, indices: Sequence[int] | np.ndarray) -> LabeledDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            sample_ids=tuple(self.sample_ids[i] for i in idx.tolist()),
            images=self.images[idx],
            labels=self.labels[idx],
        )


def class_counts(dataset: LabeledDataset) -> ClassCounts:
    """n_k for Bal-CE; every class must be present."""
    return ClassCounts(dataset.counts_per_class())


def class_index(name: str) -> int:
    """Case-insensitive class lookup."""
    key = name.strip().lower()
    try:
        return CLASS_NAMES.index(key)
    except ValueError as exc:
        raise DatasetError(f"Unknown class '{name}'; expected one of {list(CLASS_NAMES)}") from exc


def read_labels(labels_csv: Path) -> list[tuple[str, int]]:
    try:
        text = labels_csv.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"Cannot read labels file '{labels_csv}': {exc}") from exc
    rows = [row for row in csv.reader(text.splitlines()) if row]
    if not rows or [cell.strip().lower() for cell in rows[0]] != LABELS_HEADER:
        raise DatasetError(f"'{labels_csv}' must start with header {','.join(LABELS_HEADER)}")

    entries: list[tuple[str, int]] = []
    seen: set[str] = set()
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DatasetError(f"'{labels_csv}' line {line}: expected 2 fields, got {len(row)}")
        filename = row[0].strip()
        if filename in seen:
            raise DatasetError(f"'{labels_csv}' line {line}: '{filename}' listed twice")
        seen.add(filename)
        entries.append((filename, class_index(row[1])))
    return entries


def load_image_dataset(
    directory: Path,
    labels_csv: Path | None = None,
    image_size: int | None = None,
    workers: int = 4,
) -> LabeledDataset:
    """Load every PGM listed in the labels CSV (default `<directory>/labels.csv`).

    Files may be decoded concurrently; the result follows the CSV order. Without
    `image_size` all images must share one size.
    """
    labels_csv = labels_csv or directory / LABELS_FILE
    entries = read_labels(labels_csv)
    if not entries:
        raise DatasetError(f"'{labels_csv}' lists no images")

    def load(entry: tuple[str, int]) -> np.ndarray:
        path = directory / entry[0]
        if not path.is_file():
            raise DatasetError(f"Missing image file '{path}'")
        image = read_pgm(path)
        return resize(image, image_size) if image_size is not None else image

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        images = list(pool.map(load, entries))

    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DatasetError(f"images have differing sizes {sorted(shapes)}; pass an image size")

    dataset = LabeledDataset(
        sample_ids=tuple(name for name, _ in entries),
        images=np.stack(images),
        labels=np.asarray([label for _, label in entries], dtype=np.int64),
    )
    logger.debug("Loaded {} images from {}", len(dataset), directory)
    return dataset


def write_image_dataset(dataset: LabeledDataset, directory: Path) -> Path:
    """Write `<sample_id>.pgm` files plus labels.csv; returns the labels path."""
    for sample_id, image in zip(dataset.sample_ids, dataset.images):
        write_pgm(image, directory / f"{sample_id}.pgm")
    labels_path = directory / LABELS_FILE
    try:
        with labels_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(LABELS_HEADER)
            for sample_id, label in zip(dataset.sample_ids, dataset.labels.tolist()):
                writer.writerow([f"{sample_id}.pgm", CLASS_NAMES[label]])
    except OSError as exc:
        raise OutputWriteError(str(labels_path), str(exc)) from exc
    return labels_path


def stratified_split(
    dataset: LabeledDataset,
    seed: int,
    min_per_class: int = MIN_PER_CLASS,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Per class, shuffle by `seed` and send floor(0.8 n) samples to train, the rest to test.

    Both parts keep the dataset's original order.
    """
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label, name in enumerate(CLASS_NAMES):
        members = np.flatnonzero(dataset.labels == label)
        if members.size < min_per_class:
            raise DatasetError(
                f"class '{name}' has {members.size} samples; the split needs at least "
                f"{min_per_class}"
            )
        shuffled = derive_rng(seed, Stream.SPLIT, label).permutation(members)
        cut = members.size * TRAIN_NUMERATOR // SPLIT_DENOMINATOR
        train_idx.extend(shuffled[:cut].tolist())
        test_idx.extend(shuffled[cut:].tolist())
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))
