"""Combine prediction sets from several models."""

from cxr.ensemble.combine import (
    EnsembleResult,
    EnsembleSpec,
    average,
    check_alignment,
    check_label_agreement,
    combine,
    max_vote,
    normalize_weights,
    weighted_average,
)
from cxr.ensemble.predictions import (
    PredictionSet,
    from_probabilities,
    read_predictions,
    write_predictions,
)

__all__ = [
    "EnsembleResult",
    "EnsembleSpec",
    "PredictionSet",
    "average",
    "check_alignment",
    "check_label_agreement",
    "combine",
    "from_probabilities",
    "max_vote",
    "normalize_weights",
    "read_predictions",
    "weighted_average",
    "write_predictions",
]
