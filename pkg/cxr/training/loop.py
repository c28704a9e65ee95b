"""Training and evaluation loops."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from cxr.config.schema import LossKind, Mode, TrainConfig
from cxr.data.dataset import LabeledDataset, class_counts
from cxr.ensemble.predictions import PredictionSet, from_probabilities
from cxr.errors import DatasetError, OutputWriteError, TrainingDivergedError
from cxr.gtp.network import GtpNetwork, build_network, forward_network, predict_proba
from cxr.losses import ClassCounts, compute_loss
from cxr.metrics.reporting import MetricsReport, build_report, roc_points_by_class
from cxr.monitoring.logger import log_event
from cxr.numerics import Tensor
from cxr.training.batches import (
    Augmentation,
    Batch,
    BatchPrefetcher,
    assemble_batch,
    eval_batch_plan,
    train_batch_plan,
)
from cxr.training.checkpoint import checkpoint_from_network, save_checkpoint
from cxr.training.radam import RAdamState, radam_step

EPOCH_LOG_HEADER = ["epoch", "train_loss", "test_macro_f1"]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_macro_f1: float

    def as_row(self) -> list[str]:
        return [str(self.epoch), repr(self.train_loss), repr(self.test_macro_f1)]


@dataclass
class TrainResult:
    network: GtpNetwork
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_macro_f1: float = -1.0
    class_counts: Optional[ClassCounts] = None
    checkpoint_path: Optional[Path] = None
    best_checkpoint_path: Optional[Path] = None

    @property
    def final_loss(self) -> float:
        return self.history[-1].train_loss


@dataclass(frozen=True)
class Evaluation:
    report: MetricsReport
    predictions: PredictionSet
    roc: dict[str, list[tuple[float, float, float]]]


def evaluate(
    net: GtpNetwork,
    dataset: LabeledDataset,
    eval_batch_size: int = 32,
    model_id: str = "model",
) -> Evaluation:
    """EVAL-mode forward over dataset-order batches.

    Predictions depend on batch composition because every batch forms one graph.
    """
    chunks = [
        predict_proba(Tensor(dataset.images[indices]), net, Mode.EVAL)
        for indices in eval_batch_plan(len(dataset), eval_batch_size)
    ]
    probs = np.concatenate(chunks, axis=0)
    labels = dataset.labels.tolist()
    predictions = from_probabilities(model_id, dataset.sample_ids, probs, labels)
    report = build_report(probs, labels, model_id)
    return Evaluation(report, predictions, roc_points_by_class(probs, labels))


def _batch_loss(
    net: GtpNetwork,
    images: np.ndarray,
    labels: np.ndarray,
    loss: LossKind,
    counts: Optional[ClassCounts],
) -> Tensor:
    logits = forward_network(Tensor(images), net, Mode.TRAIN)
    return compute_loss(loss, logits, labels.tolist(), counts)


def initial_loss(
    net: GtpNetwork,
    dataset: LabeledDataset,
    config: TrainConfig,
    counts: Optional[ClassCounts],
) -> float:
    """Mean TRAIN-mode loss before any update; running statistics are left untouched."""
    saved = net.batch_norm.copy()
    try:
        losses = [
            _batch_loss(net, dataset.images[idx], dataset.labels[idx], config.loss, counts).item()
            for idx in train_batch_plan(len(dataset), config.batch_size, config.seed, 0)
        ]
    finally:
        net.batch_norm = saved
    return float(np.mean(losses))


class EpochLog:
    """CSV of per-epoch train loss and test macro-F1, flushed after every row."""

    def __init__(self, path: Path) -> None:
        self.path = path
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8", newline="") as handle:
                csv.writer(handle, lineterminator="\n").writerow(EPOCH_LOG_HEADER)
        except OSError as exc:
            raise OutputWriteError(str(path), str(exc)) from exc

    def append(self, record: EpochRecord) -> None:
        try:
            with self.path.open("a", encoding="utf-8", newline="") as handle:
                csv.writer(handle, lineterminator="\n").writerow(record.as_row())
        except OSError as exc:
            raise OutputWriteError(str(self.path), str(exc)) from exc


def train(
    config: TrainConfig,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    prefetch_depth: int = 2,
    split_seed: Optional[int] = None,
) -> TrainResult:
    """Fit a network on `train_set`, scoring `test_set` after every epoch.

    Writes the epoch log, the final checkpoint and the checkpoint with the best test
    macro-F1. Raises TrainingDivergedError on the first non-finite batch loss.
    """
    if len(train_set) < 2:
        raise DatasetError(f"{len(train_set)} training samples do not fill one batch")
    counts: Optional[ClassCounts] = None
    if config.loss is LossKind.BALCE or min(train_set.counts_per_class()) > 0:
        counts = class_counts(train_set)
    if config.loss is LossKind.BALCE:
        log_event("class_counts", "Balanced cross-entropy class counts", **counts.as_dict())

    net = build_network(config.model, config.seed)
    state = RAdamState(
        learning_rate=config.learning_rate,
        frozen=net.frozen_parameter_names(),
    )
    epoch_log = EpochLog(config.resolved_log_path)
    result = TrainResult(network=net, class_counts=counts)
    metadata = {
        "loss": config.loss.value,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "image_size": config.image_size,
        "split_seed": split_seed,
    }
    counts_tuple = counts.n if counts is not None else None

    def record(epoch: int, loss: float) -> None:
        macro = evaluate(net, test_set, config.eval_batch_size).report.macro_f1
        entry = EpochRecord(epoch, loss, macro)
        epoch_log.append(entry)
        result.history.append(entry)
        log_event(
            "epoch_finished",
            f"epoch {epoch}/{config.epochs} loss={loss:.6f} test_macro_f1={macro:.4f}",
            epoch=epoch,
            train_loss=loss,
            test_macro_f1=macro,
        )
        if epoch > 0 and macro > result.best_macro_f1:
            result.best_macro_f1, result.best_epoch = macro, epoch
            best = checkpoint_from_network(
                net, config.seed, counts_tuple, {**metadata, "epoch": epoch, "macro_f1": macro}
            )
            save_checkpoint(best, config.resolved_best_path)

    record(0, initial_loss(net, train_set, config, counts))

    augmentation = Augmentation(config.flip_p, config.rotation_degrees)
    for epoch in range(1, config.epochs + 1):
        plan = train_batch_plan(len(train_set), config.batch_size, config.seed, epoch)
        build = partial(
            _build_train_batch, train_set, augmentation=augmentation, seed=config.seed, epoch=epoch
        )
        losses: list[float] = []
        with BatchPrefetcher(build, plan, depth=prefetch_depth) as batches:
            for batch in batches:
                loss = _batch_loss(net, batch.images, batch.labels, config.loss, counts)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDivergedError(epoch, batch.index, value)
                loss.backward()
                radam_step(net.params, state)
                losses.append(value)
        record(epoch, float(np.mean(losses)))

    final = checkpoint_from_network(
        net, config.seed, counts_tuple, {**metadata, "epoch": config.epochs}
    )
    save_checkpoint(final, config.checkpoint_path)
    result.checkpoint_path = config.checkpoint_path
    result.best_checkpoint_path = config.resolved_best_path
    logger.info(
        "Training finished: best test macro-F1 {:.4f} at epoch {}",
        result.best_macro_f1,
        result.best_epoch,
    )
    return result


def _build_train_batch(
    dataset: LabeledDataset,
    index: int,
    indices: np.ndarray,
    augmentation: Augmentation,
    seed: int,
    epoch: int,
) -> Batch:
    return assemble_batch(dataset, index, indices, augmentation, seed, epoch)
