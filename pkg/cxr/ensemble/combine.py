"""Max voting, averaging and weighted averaging over aligned prediction sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from cxr import NUM_CLASSES
from cxr.config.schema import EnsembleMethod
from cxr.ensemble.predictions import PredictionSet
from cxr.errors import AlignmentError, ConfigurationError
from cxr.metrics.classification import argmax_predictions
from cxr.numerics.tensor import sorted_sum


@dataclass(frozen=True)
class EnsembleSpec:
    """Combination rule; WEIGHTED weights are normalised to sum to 1 on construction."""

    method: EnsembleMethod
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.method is EnsembleMethod.WEIGHTED:
            if self.weights is None:
                raise ConfigurationError("weighted ensembles need --weights")
            object.__setattr__(self, "weights", normalize_weights(self.weights))
        elif self.weights is not None:
            raise ConfigurationError("weights are only accepted by the weighted method")


@dataclass(frozen=True)
class EnsembleResult:
    """Combined scores plus the final class decision per sample."""

    scores: PredictionSet
    predicted: np.ndarray


def normalize_weights(weights: Sequence[float]) -> tuple[float, ...]:
    values = [float(w) for w in weights]
    if not values:
        raise ConfigurationError("weights must not be empty")
    if any(not math.isfinite(w) or w < 0 for w in values):
        raise ConfigurationError(f"weights must be finite and nonnegative, got {values}")
    total = math.fsum(values)
    if total <= 0:
        raise ConfigurationError("weights must not all be zero")
    if abs(total - 1.0) > 1e-12:
        logger.warning("Ensemble weights sum to {}; normalising to 1", total)
    return tuple(w / total for w in values)


def check_alignment(sets: Sequence[PredictionSet]) -> None:
    """All sets must list the same sample ids in the same order."""
    if not sets:
        raise ConfigurationError("an ensemble needs at least one prediction set")
    reference = sets[0]
    for other in sets[1:]:
        if other.sample_ids == reference.sample_ids:
            continue
        for row, (expected, found) in enumerate(zip(reference.sample_ids, other.sample_ids)):
            if expected != found:
                raise AlignmentError(
                    f"'{other.model_id}' row {row} has sample '{found}' where "
                    f"'{reference.model_id}' has '{expected}'"
                )
        raise AlignmentError(
            f"'{other.model_id}' has {len(other)} rows, '{reference.model_id}' has {len(reference)}"
        )


def check_label_agreement(sets: Sequence[PredictionSet]) -> None:
    """Every set that labels a row must give it the same class."""
    for row in range(len(sets[0])):
        known = {s.labels[row] for s in sets if s.labels[row] is not None}
        if len(known) > 1:
            raise AlignmentError(
                f"sets disagree on the label of sample '{sets[0].sample_ids[row]}': {sorted(known)}"
            )


def _carried_labels(sets: Sequence[PredictionSet]) -> tuple[Optional[int], ...]:
    """Per row, the label of the first set that has one."""
    return tuple(
        next((s.labels[row] for s in sets if s.labels[row] is not None), None)
        for row in range(len(sets[0]))
    )


def _order_free_sum(terms: np.ndarray) -> np.ndarray:
    """Sum over axis 0 in sorted order so the result ignores the order of the sets."""
    return sorted_sum(terms, axis=0)


def max_vote(sets: Sequence[PredictionSet]) -> np.ndarray:
    """Modal argmax class per sample.

    Ties go to the tied class with the highest summed probability, then the lowest index.
    """
    check_alignment(sets)
    votes = np.stack([argmax_predictions(s.probs) for s in sets])
    prob_sums = _order_free_sum(np.stack([s.probs for s in sets]))
    decisions = np.empty(len(sets[0]), dtype=np.int64)
    for row in range(votes.shape[1]):
        tally = np.bincount(votes[:, row], minlength=NUM_CLASSES)
        tied = np.flatnonzero(tally == tally.max())
        # argmax returns the first maximum, i.e. the lowest tied index
        decisions[row] = tied[int(np.argmax(prob_sums[row, tied]))]
    return decisions


def vote_shares(sets: Sequence[PredictionSet]) -> np.ndarray:
    votes = np.stack([argmax_predictions(s.probs) for s in sets])
    shares = np.zeros((votes.shape[1], NUM_CLASSES))
    for row in range(votes.shape[1]):
        shares[row] = np.bincount(votes[:, row], minlength=NUM_CLASSES) / len(sets)
    return shares


def weighted_average(
    sets: Sequence[PredictionSet],
    weights: Sequence[float],
    model_id: str = "weighted",
) -> PredictionSet:
    """Per sample sum_i w_i probs_i, with weights normalised to 1."""
    check_alignment(sets)
    if len(weights) != len(sets):
        raise ConfigurationError(f"{len(weights)} weights given for {len(sets)} prediction sets")
    normalized = normalize_weights(weights)
    terms = np.stack([w * s.probs for w, s in zip(normalized, sets)])
    return PredictionSet(
        model_id=model_id,
        sample_ids=sets[0].sample_ids,
        probs=_order_free_sum(terms),
        labels=_carried_labels(sets),
    )


def average(sets: Sequence[PredictionSet], model_id: str = "average") -> PredictionSet:
    """Equal-weight mean of the member probabilities."""
    check_alignment(sets)
    m = len(sets)
    terms = np.stack([s.probs for s in sets])
    return PredictionSet(
        model_id=model_id,
        sample_ids=sets[0].sample_ids,
        probs=_order_free_sum(terms) / m,
        labels=_carried_labels(sets),
    )


def combine(sets: Sequence[PredictionSet], spec: EnsembleSpec, model_id: str) -> EnsembleResult:
    """Apply `spec`. Max voting reports vote shares as its per-class scores."""
    if spec.method is EnsembleMethod.MAX_VOTE:
        decisions = max_vote(sets)
        scores = PredictionSet(
            model_id, sets[0].sample_ids, vote_shares(sets), _carried_labels(sets)
        )
        return EnsembleResult(scores=scores, predicted=decisions)
    if spec.method is EnsembleMethod.AVERAGE:
        scores = average(sets, model_id=model_id)
    else:
        assert spec.weights is not None
        scores = weighted_average(sets, spec.weights, model_id=model_id)
    return EnsembleResult(scores=scores, predicted=argmax_predictions(scores.probs))
