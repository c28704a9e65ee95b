from cxr.training.batches import (
    Augmentation,
    Batch,
    BatchPrefetcher,
    assemble_batch,
    eval_batch_plan,
    train_batch_plan,
)
from cxr.training.checkpoint import (
    Checkpoint,
    checkpoint_from_network,
    load_checkpoint,
    load_network,
    restore_network,
    save_checkpoint,
)
from cxr.training.loop import EpochRecord, Evaluation, TrainResult, evaluate, initial_loss, train
from cxr.training.radam import RAdamState, radam_step

__all__ = [
    "Augmentation",
    "Batch",
    "BatchPrefetcher",
    "Checkpoint",
    "EpochRecord",
    "Evaluation",
    "RAdamState",
    "TrainResult",
    "assemble_batch",
    "checkpoint_from_network",
    "eval_batch_plan",
    "evaluate",
    "initial_loss",
    "load_checkpoint",
    "load_network",
    "radam_step",
    "restore_network",
    "save_checkpoint",
    "train",
    "train_batch_plan",
]
