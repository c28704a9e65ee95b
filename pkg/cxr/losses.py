"""Cross-entropy and balanced cross-entropy over 4-class logits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from cxr import CLASS_NAMES, NUM_CLASSES
from cxr.config.schema import LossKind
from cxr.errors import ConfigurationError, LabelIndexError, ShapeError
from cxr.numerics import Tensor
from cxr.numerics.tensor import Function


@dataclass(frozen=True)
class ClassCounts:
    """Training-split instance counts n_k, one per class."""

    n: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.n) != NUM_CLASSES:
            raise ConfigurationError(f"class counts need {NUM_CLASSES} entries, got {len(self.n)}")
        for name, count in zip(CLASS_NAMES, self.n):
            if int(count) != count or count < 1:
                raise ConfigurationError(
                    f"class count for '{name}' must be a positive integer, got {count}"
                )
        object.__setattr__(self, "n", tuple(int(c) for c in self.n))

    @property
    def total(self) -> int:
        return sum(self.n)

    def log_counts(self) -> np.ndarray:
        return np.log(np.asarray(self.n, dtype=np.float64))

    def as_dict(self) -> dict[str, int]:
        return dict(zip(CLASS_NAMES, self.n))


def _validate_targets(logits: Tensor, targets: Sequence[int]) -> np.ndarray:
    if logits.ndim != 2 or logits.dims[0] < 1:
        raise ShapeError(f"loss expects logits [b >= 1, C], got {logits.dims}")
    indices = np.asarray(targets)
    if indices.shape != (logits.dims[0],):
        raise ShapeError(f"{logits.dims[0]} logit rows but {indices.shape} targets")
    num_classes = logits.dims[1]
    for value in indices.tolist():
        if int(value) != value or not 0 <= value < num_classes:
            raise LabelIndexError(value, num_classes)
    return indices.astype(np.int64)


class CrossEntropy(Function):
    """Mean of -log softmax(z)[k] over the batch, via max-shifted log-sum-exp."""

    def forward(self, logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
        b = logits.shape[0]
        log_norm = logsumexp(logits, axis=1)
        self.probs = np.exp(logits - log_norm[:, None])
        self.targets = targets
        per_sample = log_norm - logits[np.arange(b), targets]
        return np.asarray(max(float(per_sample.mean()), 0.0))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        b = self.probs.shape[0]
        d_logits = self.probs.copy()
        d_logits[np.arange(b), self.targets] -= 1.0
        return (grad * d_logits / b,)


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    return CrossEntropy.apply(logits, targets=_validate_targets(logits, targets))


def balanced_cross_entropy(logits: Tensor, targets: Sequence[int], counts: ClassCounts) -> Tensor:
    """-log(n_k e^{z_k} / sum_j n_j e^{z_j}), evaluated as CE on logits shifted by log n."""
    if logits.ndim != 2 or logits.dims[1] != len(counts.n):
        raise ShapeError(f"logits {logits.dims} do not match {len(counts.n)} class counts")
    return cross_entropy(logits + Tensor(counts.log_counts()), targets)


def compute_loss(
    kind: LossKind,
    logits: Tensor,
    targets: Sequence[int],
    counts: ClassCounts | None = None,
) -> Tensor:
    if kind is LossKind.CE:
        return cross_entropy(logits, targets)
    if counts is None:
        raise ConfigurationError("balanced cross-entropy needs class counts")
    return balanced_cross_entropy(logits, targets, counts)
