"""Confusion matrix, per-class accuracy, macro-F1 and one-vs-all AUC-ROC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import rankdata

from cxr import NUM_CLASSES
from cxr.errors import LabelIndexError, ShapeError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[actual, predicted]."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
            raise ShapeError(f"confusion matrix must be square with C >= 2, got {counts.shape}")
        if (counts < 0).any():
            raise ShapeError("confusion matrix counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_positives(self) -> np.ndarray:
        return np.diag(self.counts)

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def predicted_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def to_rows(self) -> list[list[int]]:
        return self.counts.tolist()


def _check_indices(values: np.ndarray, num_classes: int) -> None:
    for value in values.tolist():
        if not 0 <= value < num_classes:
            raise LabelIndexError(value, num_classes)


def confusion_matrix(
    predicted: Sequence[int],
    actual: Sequence[int],
    num_classes: int = NUM_CLASSES,
) -> ConfusionMatrix:
    predicted_arr = np.asarray(predicted, dtype=np.int64)
    actual_arr = np.asarray(actual, dtype=np.int64)
    if predicted_arr.shape != actual_arr.shape or predicted_arr.ndim != 1:
        raise ShapeError(
            f"predicted ({predicted_arr.shape}) and actual ({actual_arr.shape}) lengths differ"
        )
    if predicted_arr.size == 0:
        raise ShapeError("confusion matrix needs at least one sample")
    _check_indices(predicted_arr, num_classes)
    _check_indices(actual_arr, num_classes)

    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (actual_arr, predicted_arr), 1)
    return ConfusionMatrix(counts)


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """Elementwise division with 0/0 (and x/0) taken as 0."""
    num = numerator.astype(np.float64)
    den = denominator.astype(np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def per_class_precision(cm: ConfusionMatrix) -> np.ndarray:
    return _ratio(cm.true_positives(), cm.predicted_totals())


def per_class_recall(cm: ConfusionMatrix) -> np.ndarray:
    return _ratio(cm.true_positives(), cm.support())


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    precision = per_class_precision(cm)
    recall = per_class_recall(cm)
    return _ratio(2.0 * recall * precision, recall + precision)


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1; classes with no TP, FP or FN contribute 0."""
    if cm.total == 0:
        raise UndefinedMetricError("macro-F1 is undefined for an empty confusion matrix")
    return float(per_class_f1(cm).mean())


def per_class_accuracy(cm: ConfusionMatrix) -> list[float | None]:
    """Recall per class; None where the class has no actual samples."""
    support = cm.support()
    tp = cm.true_positives()
    return [float(tp[i] / support[i]) if support[i] > 0 else None for i in range(cm.num_classes)]


def _binary_scores(
    scores: Sequence[Sequence[float]] | np.ndarray,
    actual: Sequence[int],
    positive_class: int,
) -> tuple[np.ndarray, np.ndarray]:
    matrix = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(actual, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[0] != labels.shape[0]:
        raise ShapeError(f"scores {matrix.shape} do not match {labels.shape[0]} labels")
    if not 0 <= positive_class < matrix.shape[1]:
        raise LabelIndexError(positive_class, matrix.shape[1])
    _check_indices(labels, matrix.shape[1])
    positives = labels == positive_class
    n_pos = int(positives.sum())
    if n_pos == 0 or n_pos == labels.size:
        kind = "positive" if n_pos == 0 else "negative"
        raise UndefinedMetricError(
            f"AUC-ROC undefined for class {positive_class}: no {kind} samples"
        )
    return matrix[:, positive_class], positives


def auc_roc_one_vs_all(
    scores: Sequence[Sequence[float]] | np.ndarray,
    actual: Sequence[int],
    positive_class: int,
) -> float:
    """Mann-Whitney U / (P N) using average ranks, so ties count one half."""
    class_scores, positives = _binary_scores(scores, actual, positive_class)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    ranks = rankdata(class_scores, method="average")
    u_statistic = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def roc_curve_points(
    scores: Sequence[Sequence[float]] | np.ndarray,
    actual: Sequence[int],
    positive_class: int,
) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) staircase, thresholds descending, starting at (inf, 0, 0).

    A sample counts as positive at threshold t when its score >= t.
    """
    class_scores, positives = _binary_scores(scores, actual, positive_class)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    order = np.argsort(-class_scores, kind="stable")
    sorted_scores = class_scores[order]
    sorted_pos = positives[order]

    points: list[tuple[float, float, float]] = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    for idx, (score, is_pos) in enumerate(zip(sorted_scores, sorted_pos)):
        tp += int(is_pos)
        fp += int(not is_pos)
        last_of_tie = idx == len(sorted_scores) - 1 or sorted_scores[idx + 1] != score
        if last_of_tie:
            points.append((float(score), fp / n_neg, tp / n_pos))
    return points


def trapezoid_area(points: Sequence[tuple[float, float, float]]) -> float:
    fpr = np.array([p[1] for p in points])
    tpr = np.array([p[2] for p in points])
    return float(trapezoid(tpr, fpr))


def argmax_predictions(probabilities: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Row-wise argmax; the lowest class index wins ties."""
    matrix = np.asarray(probabilities, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"argmax expects a [n, C] matrix, got {matrix.shape}")
    return np.argmax(matrix, axis=1)
