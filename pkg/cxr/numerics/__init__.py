"""Dense tensor arithmetic with reverse-mode gradients and a finite-difference oracle."""

from cxr.numerics.functional import (
    avg_pool2d,
    concat,
    conv2d,
    crop,
    linear,
    matmul,
    ordered_sum,
    relu,
    sigmoid,
    softmax,
)
from cxr.numerics.gradcheck import (
    analytic_gradient,
    finite_difference_gradient,
    max_relative_error,
)
from cxr.numerics.params import ParameterStore
from cxr.numerics.tensor import Tensor, ordered_matmul

__all__ = [
    "ParameterStore",
    "Tensor",
    "analytic_gradient",
    "avg_pool2d",
    "concat",
    "conv2d",
    "crop",
    "finite_difference_gradient",
    "linear",
    "matmul",
    "max_relative_error",
    "ordered_matmul",
    "ordered_sum",
    "relu",
    "sigmoid",
    "softmax",
]
