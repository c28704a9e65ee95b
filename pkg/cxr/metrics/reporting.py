"""Metrics report assembly and its JSON / CSV forms."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError, field_serializer, field_validator

from cxr import CLASS_NAMES
from cxr.errors import OutputWriteError, ReportFormatError, UndefinedMetricError
from cxr.metrics.classification import (
    ConfusionMatrix,
    argmax_predictions,
    auc_roc_one_vs_all,
    confusion_matrix,
    macro_f1,
    per_class_accuracy,
    per_class_f1,
    per_class_precision,
    per_class_recall,
    roc_curve_points,
)

UNDEFINED = "undefined"
COMPARISON_COLUMNS = ["model", "macro_f1", *(f"auc_{name}" for name in CLASS_NAMES)]


class MetricsReport(BaseModel):
    """Evaluation summary for one prediction set. Undefined values are stored as None."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model_id: str
    num_samples: int
    macro_f1: float
    accuracy: dict[str, Optional[float]]
    auc: dict[str, Optional[float]]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    confusion: list[list[int]]

    @field_validator("accuracy", "auc", mode="before")
    @classmethod
    def parse_undefined(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {k: (None if v == UNDEFINED else v) for k, v in value.items()}
        return value

    @field_serializer("accuracy", "auc")
    def render_undefined(self, value: dict[str, Optional[float]]) -> dict[str, Any]:
        return {k: (UNDEFINED if v is None else v) for k, v in value.items()}

    def confusion_matrix(self) -> ConfusionMatrix:
        return ConfusionMatrix(np.asarray(self.confusion))

    def undefined_auc_classes(self) -> list[str]:
        return [name for name, value in self.auc.items() if value is None]


def build_report(
    probabilities: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
    model_id: str,
    predicted: Sequence[int] | np.ndarray | None = None,
) -> MetricsReport:
    """Score class decisions (argmax unless given) and probabilities against labels."""
    probs = np.asarray(probabilities, dtype=np.float64)
    if predicted is None:
        predicted = argmax_predictions(probs)
    predicted = np.asarray(predicted, dtype=np.int64)
    cm = confusion_matrix(predicted.tolist(), list(labels), num_classes=probs.shape[1])
    return report_from_confusion(cm, probs, labels, model_id)


def report_from_confusion(
    cm: ConfusionMatrix,
    probabilities: np.ndarray,
    labels: Sequence[int],
    model_id: str,
) -> MetricsReport:
    names = CLASS_NAMES[: cm.num_classes]
    auc: dict[str, Optional[float]] = {}
    for index, name in enumerate(names):
        try:
            auc[name] = auc_roc_one_vs_all(probabilities, labels, index)
        except UndefinedMetricError as exc:
            logger.warning("AUC undefined for class '{}' in '{}': {}", name, model_id, exc)
            auc[name] = None

    return MetricsReport(
        model_id=model_id,
        num_samples=cm.total,
        macro_f1=macro_f1(cm),
        accuracy=dict(zip(names, per_class_accuracy(cm))),
        auc=auc,
        precision=dict(zip(names, per_class_precision(cm).tolist())),
        recall=dict(zip(names, per_class_recall(cm).tolist())),
        f1=dict(zip(names, per_class_f1(cm).tolist())),
        support=dict(zip(names, cm.support().tolist())),
        confusion=cm.to_rows(),
    )


def roc_points_by_class(
    probabilities: np.ndarray,
    labels: Sequence[int],
) -> dict[str, list[tuple[float, float, float]]]:
    """ROC staircases for every class whose AUC is defined."""
    curves: dict[str, list[tuple[float, float, float]]] = {}
    for index, name in enumerate(CLASS_NAMES[: probabilities.shape[1]]):
        try:
            curves[name] = roc_curve_points(probabilities, labels, index)
        except UndefinedMetricError:
            continue
    return curves


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputWriteError(str(path), str(exc)) from exc


def write_report_json(report: MetricsReport, path: Path) -> None:
    with _open_for_write(path) as handle:
        handle.write(report.model_dump_json(indent=2))
        handle.write("\n")


def read_report_json(path: Path) -> MetricsReport:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportFormatError(f"Failed to read report '{path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportFormatError(
            f"Invalid JSON in report '{path}': {exc.msg} (line {exc.lineno}, column {exc.colno})."
        ) from exc
    try:
        return MetricsReport.model_validate(payload)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ReportFormatError(f"Malformed report '{path}': {problems}") from exc


def write_confusion_csv(cm: ConfusionMatrix, path: Path) -> None:
    """Header of class names, then one row of predicted-class counts per actual class."""
    with _open_for_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CLASS_NAMES[: cm.num_classes])
        writer.writerows(cm.to_rows())


def write_roc_csv(points: Sequence[tuple[float, float, float]], path: Path) -> None:
    with _open_for_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["threshold", "fpr", "tpr"])
        for threshold, fpr, tpr in points:
            writer.writerow([repr(threshold), repr(fpr), repr(tpr)])


def comparison_rows(reports: Sequence[MetricsReport]) -> list[list[str]]:
    """One row per report in input order: model, macro_f1, then AUC per class."""
    rows: list[list[str]] = []
    for report in reports:
        row = [report.model_id, repr(report.macro_f1)]
        for name in CLASS_NAMES:
            value = report.auc.get(name)
            row.append(UNDEFINED if value is None else repr(value))
        rows.append(row)
    return rows


def write_comparison_csv(reports: Sequence[MetricsReport], path: Path) -> None:
    with _open_for_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        writer.writerows(comparison_rows(reports))
