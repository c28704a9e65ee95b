"""Desk-scale directional runs on the default synthetic dataset.

Marked slow: each trains several networks for the full desk schedule.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from cxr.config import LossKind, TrainConfig, load_train_config, shipped_config
from cxr.config.schema import SynthConfig
from cxr.data import generate_synthetic, stratified_split
from cxr.ensemble import average
from cxr.metrics import build_report
from cxr.training import evaluate, train

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def splits():
    dataset = generate_synthetic(SynthConfig())
    return stratified_split(dataset, seed=0)


def _desk_config(tmp_path: Path, name: str, **overrides) -> TrainConfig:
    return load_train_config(
        shipped_config("desk"), {"checkpoint_path": tmp_path / f"{name}.ckpt", **overrides}
    )


def test_balanced_loss_lifts_minority_recall(tmp_path: Path, splits) -> None:
    train_set, test_set = splits
    recall: dict[LossKind, list[float]] = {LossKind.CE: [], LossKind.BALCE: []}
    for loss in recall:
        for seed in SEEDS:
            config = _desk_config(tmp_path, f"{loss.value}_{seed}", loss=loss.value, seed=seed)
            result = train(config, train_set, test_set)
            report = evaluate(result.network, test_set, config.eval_batch_size).report
            recall[loss].append(report.accuracy["silicosis"] or 0.0)
    assert np.mean(recall[LossKind.BALCE]) >= np.mean(recall[LossKind.CE])


def test_averaging_six_models_matches_the_best_member(tmp_path: Path, splits) -> None:
    train_set, test_set = splits
    members = []
    for use_gtp in (False, True):
        for seed in SEEDS:
            name = f"{'gtp' if use_gtp else 'dnn'}_{seed}"
            config = _desk_config(tmp_path, name, seed=seed, model={"use_gtp": use_gtp})
            result = train(config, train_set, test_set)
            members.append(evaluate(result.network, test_set, config.eval_batch_size, name))

    best_single = max(member.report.macro_f1 for member in members)
    combined = average([member.predictions for member in members])
    ensemble = build_report(combined.probs, combined.labels, "average_6")
    assert ensemble.macro_f1 >= best_single - 0.01
