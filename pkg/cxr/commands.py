"""Command orchestration behind `cli.py`.

Each `cmd_*` function does one command's work and raises GtpError subclasses on failure;
`run_command` turns those into exit codes the way the CLI reports them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from loguru import logger
from rich.console import Console
from rich.table import Table

from cxr import CLASS_NAMES
from cxr.config.schema import EnsembleMethod, SynthConfig, TrainConfig
from cxr.data.dataset import (
    LabeledDataset,
    load_image_dataset,
    stratified_split,
    write_image_dataset,
)
from cxr.data.synthetic import generate_synthetic
from cxr.ensemble.combine import (
    EnsembleResult,
    EnsembleSpec,
    check_alignment,
    check_label_agreement,
    combine,
)
from cxr.ensemble.predictions import read_predictions, write_predictions
from cxr.errors import (
    ConfigurationError,
    DatasetError,
    GtpError,
    OutputWriteError,
    PredictionValidationError,
    RuntimeFailure,
)
from cxr.metrics.reporting import (
    COMPARISON_COLUMNS,
    MetricsReport,
    build_report,
    comparison_rows,
    read_report_json,
    write_comparison_csv,
    write_confusion_csv,
    write_report_json,
    write_roc_csv,
)
from cxr.monitoring.logger import log_event
from cxr.training.checkpoint import load_network
from cxr.training.loop import Evaluation, TrainResult, evaluate, train

MANIFEST_FILE = "manifest.json"
DEFAULT_SPLIT_SEED = 0


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"
    ALL = "all"


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    reason: str


def run_command(name: str, action: Callable[[], Any]) -> CommandResult:
    """Run one command, mapping failures onto their exit code and reason."""
    try:
        action()
    except GtpError as exc:
        logger.bind(event="command_failed").error(
            "{} failed: {} | exit_code={} | reason={}", name, exc, exc.exit_code, exc.reason
        )
        return CommandResult(exit_code=exc.exit_code, reason=exc.reason)
    except Exception as exc:  # pragma: no cover - last-resort mapping
        failure = RuntimeFailure(f"Unexpected {type(exc).__name__}: {exc}", reason="unexpected")
        logger.opt(exception=exc).error("{} failed unexpectedly", name)
        return CommandResult(exit_code=failure.exit_code, reason=failure.reason)
    return CommandResult(exit_code=0, reason="ok")


def print_resolved_config(command: str, payload: dict[str, Any], console: Console) -> None:
    console.rule(f"[bold]{command}[/bold] resolved configuration")
    console.print_json(json.dumps(payload, sort_keys=True, default=str))


# --- datasets on disk -------------------------------------------------------


def write_manifest(directory: Path, config: SynthConfig, dataset: LabeledDataset) -> Path:
    path = directory / MANIFEST_FILE
    payload = {
        "generator": "synthetic",
        "seed": config.seed,
        "num_samples": len(dataset),
        "counts": dict(zip(CLASS_NAMES, dataset.counts_per_class())),
        "config": config.model_dump(mode="json"),
    }
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputWriteError(str(path), str(exc)) from exc
    return path


def split_seed_for(directory: Path) -> int:
    """The generator seed recorded next to the images, else 0."""
    path = directory / MANIFEST_FILE
    if not path.is_file():
        return DEFAULT_SPLIT_SEED
    try:
        return int(json.loads(path.read_text(encoding="utf-8"))["seed"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"Unreadable manifest '{path}': {exc}") from exc


def load_splits(
    directory: Path, image_size: Optional[int]
) -> tuple[LabeledDataset, LabeledDataset, int]:
    """Load a labelled directory and split it 4:1 per class; returns (train, test, seed)."""
    if not directory.is_dir():
        raise DatasetError(f"Data directory not found: '{directory}'")
    dataset = load_image_dataset(directory, image_size=image_size)
    seed = split_seed_for(directory)
    train_set, test_set = stratified_split(dataset, seed)
    log_event(
        "dataset_loaded",
        f"{len(dataset)} images from {directory}: {len(train_set)} train / {len(test_set)} test",
        data_dir=str(directory),
        split_seed=seed,
        train_counts=list(train_set.counts_per_class()),
        test_counts=list(test_set.counts_per_class()),
    )
    return train_set, test_set, seed


# --- commands -----------------------------------------------------------------


def cmd_gen_data(config: SynthConfig, out: Path) -> LabeledDataset:
    """Render the synthetic set into `out`: PGM files, labels.csv and manifest.json."""
    dataset = generate_synthetic(config)
    if dataset.counts_per_class() != tuple(config.counts):
        raise DatasetError(
            f"generated counts {dataset.counts_per_class()} differ from {tuple(config.counts)}"
        )
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputWriteError(str(out), str(exc)) from exc
    labels_path = write_image_dataset(dataset, out)
    write_manifest(out, config, dataset)
    log_event(
        "dataset_written",
        f"Wrote {len(dataset)} synthetic images to {out}",
        labels=str(labels_path),
        counts=list(dataset.counts_per_class()),
        seed=config.seed,
    )
    return dataset


def cmd_train(config: TrainConfig, prefetch_depth: int = 2) -> TrainResult:
    if config.data_dir is None:
        raise ConfigurationError("train needs a data directory (--data)")
    train_set, test_set, split_seed = load_splits(config.data_dir, config.image_size)
    result = train(
        config, train_set, test_set, prefetch_depth=prefetch_depth, split_seed=split_seed
    )
    log_event(
        "checkpoint_written",
        f"Checkpoints at {result.checkpoint_path} and {result.best_checkpoint_path}",
        checkpoint=str(result.checkpoint_path),
        best_checkpoint=str(result.best_checkpoint_path),
        best_epoch=result.best_epoch,
        best_macro_f1=result.best_macro_f1,
    )
    return result


def companion_path(report_path: Path, suffix: str) -> Path:
    """`out/run.json` -> `out/run.<suffix>`."""
    return report_path.with_name(f"{report_path.stem}.{suffix}")


def cmd_eval(
    checkpoint_path: Path,
    data_dir: Path,
    preds_path: Path,
    report_path: Path,
    split: Split = Split.TEST,
    eval_batch_size: int = 32,
    model_id: Optional[str] = None,
) -> Evaluation:
    """Score a checkpoint on one split of `data_dir` and write every evaluation artifact."""
    net, checkpoint = load_network(checkpoint_path)
    stored_size = checkpoint.metadata.get("image_size")
    image_size = int(stored_size) if stored_size else None
    if split is Split.ALL:
        if not data_dir.is_dir():
            raise DatasetError(f"Data directory not found: '{data_dir}'")
        dataset = load_image_dataset(data_dir, image_size=image_size)
    else:
        train_set, test_set, _ = load_splits(data_dir, image_size)
        dataset = train_set if split is Split.TRAIN else test_set

    evaluation = evaluate(net, dataset, eval_batch_size, model_id or checkpoint_path.stem)
    report = evaluation.report
    write_predictions(evaluation.predictions, preds_path)
    write_report_json(report, report_path)
    write_confusion_csv(report.confusion_matrix(), companion_path(report_path, "confusion.csv"))
    for name, points in evaluation.roc.items():
        write_roc_csv(points, companion_path(report_path, f"roc_{name}.csv"))

    undefined = report.undefined_auc_classes()
    if undefined:
        log_event(
            "undefined_metric",
            f"AUC undefined for {undefined}; reported as 'undefined'",
            classes=undefined,
        )
    log_event(
        "evaluation_finished",
        f"{report.model_id}: macro-F1 {report.macro_f1:.4f} on {report.num_samples} samples",
        model=report.model_id,
        macro_f1=report.macro_f1,
        split=split.value,
    )
    return evaluation


def cmd_ensemble(
    preds_paths: Sequence[Path],
    method: EnsembleMethod,
    weights: Optional[Sequence[float]],
    report_path: Path,
    out_path: Optional[Path] = None,
    model_id: Optional[str] = None,
) -> tuple[EnsembleResult, MetricsReport]:
    """Combine prediction files and score the combination against their embedded labels."""
    sets = [read_predictions(path) for path in preds_paths]
    check_alignment(sets)
    check_label_agreement(sets)
    spec = EnsembleSpec(method, tuple(weights) if weights is not None else None)
    if spec.weights is not None and len(spec.weights) != len(sets):
        raise ConfigurationError(f"{len(spec.weights)} weights given for {len(sets)} files")
    name = model_id or f"{method.value}_{len(sets)}"
    result = combine(sets, spec, name)
    if not result.scores.has_labels:
        raise PredictionValidationError(
            "ensemble scoring needs a label for every sample; the label column is empty"
        )

    report = build_report(
        result.scores.probs, result.scores.label_array(), name, predicted=result.predicted
    )
    write_report_json(report, report_path)
    write_confusion_csv(report.confusion_matrix(), companion_path(report_path, "confusion.csv"))
    if out_path is not None:
        write_predictions(result.scores, out_path)
    log_event(
        "ensemble_finished",
        f"{name}: macro-F1 {report.macro_f1:.4f} from {len(sets)} models",
        method=method.value,
        members=[s.model_id for s in sets],
        weights=list(spec.weights) if spec.weights else None,
        macro_f1=report.macro_f1,
    )
    return result, report


def cmd_report(
    report_paths: Sequence[Path],
    out_path: Path,
    console: Optional[Console] = None,
) -> list[MetricsReport]:
    """Merge metric reports into one comparison table, input order preserved."""
    reports = [read_report_json(path) for path in report_paths]
    write_comparison_csv(reports, out_path)
    if console is not None:
        table = Table(title="Model comparison")
        for column in COMPARISON_COLUMNS:
            table.add_column(column, justify="left" if column == "model" else "right")
        for row in comparison_rows(reports):
            table.add_row(row[0], *(_short(cell) for cell in row[1:]))
        console.print(table)
    log_event("report_written", f"{len(reports)} rows written to {out_path}", out=str(out_path))
    return reports


def _short(cell: str) -> str:
    try:
        return f"{float(cell):.4f}"
    except ValueError:
        return cell
