"""Graph Transformer Post-hoc classification of chest X-ray style images."""

CLASS_NAMES: tuple[str, ...] = ("silicosis", "normal", "bacterial", "viral")
NUM_CLASSES = len(CLASS_NAMES)

__all__ = ["CLASS_NAMES", "NUM_CLASSES"]
