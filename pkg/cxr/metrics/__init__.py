"""Classification metrics and report serialization."""

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
    trapezoid_area,
)
from cxr.metrics.reporting import (
    MetricsReport,
    build_report,
    read_report_json,
    roc_points_by_class,
    write_comparison_csv,
    write_confusion_csv,
    write_report_json,
    write_roc_csv,
)

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "argmax_predictions",
    "auc_roc_one_vs_all",
    "build_report",
    "confusion_matrix",
    "macro_f1",
    "per_class_accuracy",
    "per_class_f1",
    "per_class_precision",
    "per_class_recall",
    "read_report_json",
    "roc_curve_points",
    "roc_points_by_class",
    "trapezoid_area",
    "write_comparison_csv",
    "write_confusion_csv",
    "write_report_json",
    "write_roc_csv",
]
