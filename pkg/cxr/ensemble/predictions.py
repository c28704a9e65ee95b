"""Per-sample class probabilities from one model, and their CSV form."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from cxr import CLASS_NAMES, NUM_CLASSES
from cxr.errors import (
    OutputWriteError,
    PredictionParseError,
    PredictionValidationError,
    ShapeError,
)

HEADER = ["sample_id", *(f"p_{name}" for name in CLASS_NAMES), "label"]
SIMPLEX_TOLERANCE = 1e-4


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Rows share one order: sample_ids[i], probs[i], labels[i]."""

    model_id: str
    sample_ids: tuple[str, ...]
    probs: np.ndarray
    labels: tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64)
        n = len(self.sample_ids)
        if probs.shape != (n, NUM_CLASSES):
            raise ShapeError(f"probabilities must be [{n}, {NUM_CLASSES}], got {probs.shape}")
        if len(self.labels) != n:
            raise ShapeError(f"{n} samples but {len(self.labels)} labels")
        if n == 0:
            raise PredictionValidationError(f"prediction set '{self.model_id}' has no rows")
        if len(set(self.sample_ids)) != n:
            duplicate = next(s for s, k in Counter(self.sample_ids).items() if k > 1)
            raise PredictionValidationError(
                f"sample id '{duplicate}' repeats in prediction set '{self.model_id}'"
            )
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise PredictionValidationError(
                f"prediction set '{self.model_id}' has negative or non-finite probabilities"
            )
        sums = probs.sum(axis=1)
        off = np.flatnonzero(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE)
        if off.size:
            row = int(off[0])
            raise PredictionValidationError(
                f"probabilities for '{self.sample_ids[row]}' sum to {sums[row]!r}, expected 1"
            )
        for label in self.labels:
            if label is not None and not 0 <= label < NUM_CLASSES:
                raise PredictionValidationError(f"label {label} outside 0..{NUM_CLASSES - 1}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def has_labels(self) -> bool:
        return all(label is not None for label in self.labels)

    def label_array(self) -> np.ndarray:
        if not self.has_labels:
            raise PredictionValidationError(f"prediction set '{self.model_id}' lacks labels")
        return np.asarray(self.labels, dtype=np.int64)

    def matches(self, other: PredictionSet) -> bool:
        """Same ids, labels and bit-identical probabilities (model ids may differ)."""
        return (
            self.sample_ids == other.sample_ids
            and self.labels == other.labels
            and np.array_equal(self.probs, other.probs)
        )

    def renamed(self, model_id: str) -> PredictionSet:
        return PredictionSet(model_id, self.sample_ids, self.probs, self.labels)


def write_predictions(predictions: PredictionSet, path: Path) -> None:
    """UTF-8 CSV, probabilities at 17 significant digits, empty label when unknown."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(HEADER)
            for sample_id, row, label in zip(
                predictions.sample_ids, predictions.probs, predictions.labels
            ):
                writer.writerow(
                    [sample_id, *(format(float(p), ".17g") for p in row), _label_cell(label)]
                )
    except OSError as exc:
        raise OutputWriteError(str(path), str(exc)) from exc


def _label_cell(label: Optional[int]) -> str:
    return "" if label is None else str(label)


def read_predictions(path: Path, model_id: str | None = None) -> PredictionSet:
    """Parse a prediction CSV; `model_id` defaults to the file stem."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PredictionParseError(str(path), 0, f"cannot read file: {exc}") from exc

    rows = list(csv.reader(text.splitlines()))
    if not rows or [cell.strip() for cell in rows[0]] != HEADER:
        raise PredictionParseError(str(path), 1, f"header must be {','.join(HEADER)}")

    sample_ids: list[str] = []
    probs: list[list[float]] = []
    labels: list[Optional[int]] = []
    for line, cells in enumerate(rows[1:], start=2):
        if not cells:
            continue
        if len(cells) != len(HEADER):
            raise PredictionParseError(
                str(path), line, f"expected {len(HEADER)} fields, got {len(cells)}"
            )
        sample_id = cells[0].strip()
        if not sample_id:
            raise PredictionParseError(str(path), line, "empty sample_id")
        try:
            values = [float(cell) for cell in cells[1 : 1 + NUM_CLASSES]]
        except ValueError as exc:
            raise PredictionParseError(str(path), line, f"non-numeric probability: {exc}") from exc
        sample_ids.append(sample_id)
        probs.append(values)
        labels.append(_parse_label(cells[-1], str(path), line))

    if not sample_ids:
        raise PredictionParseError(str(path), 2, "no prediction rows")
    return PredictionSet(
        model_id=model_id or path.stem,
        sample_ids=tuple(sample_ids),
        probs=np.asarray(probs),
        labels=tuple(labels),
    )


def _parse_label(cell: str, path: str, line: int) -> Optional[int]:
    cell = cell.strip()
    if not cell:
        return None
    try:
        label = int(cell)
    except ValueError as exc:
        raise PredictionParseError(path, line, f"label '{cell}' is not a class index") from exc
    if not 0 <= label < NUM_CLASSES:
        raise PredictionParseError(path, line, f"label {label} outside 0..{NUM_CLASSES - 1}")
    return label


def from_probabilities(
    model_id: str,
    sample_ids: Sequence[str],
    probs: np.ndarray,
    labels: Sequence[Optional[int]] | None = None,
) -> PredictionSet:
    labels = tuple(labels) if labels is not None else (None,) * len(sample_ids)
    return PredictionSet(model_id, tuple(sample_ids), probs, labels)
