"""Image ingestion, augmentation, splitting and the synthetic dataset generator."""

from cxr.data.dataset import (
    LabeledDataset,
    class_counts,
    load_image_dataset,
    stratified_split,
    write_image_dataset,
)
from cxr.data.images import (
    apply_augmentation,
    random_horizontal_flip,
    random_rotation,
    read_pgm,
    resize,
    rotate,
    write_pgm,
)
from cxr.data.synthetic import generate_synthetic

__all__ = [
    "LabeledDataset",
    "apply_augmentation",
    "class_counts",
    "generate_synthetic",
    "load_image_dataset",
    "random_horizontal_flip",
    "random_rotation",
    "read_pgm",
    "resize",
    "rotate",
    "stratified_split",
    "write_image_dataset",
    "write_pgm",
]
