"""Central finite-difference oracle for validating analytic gradients."""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from cxr.errors import ConfigurationError, GradientOracleError
from cxr.numerics.params import ParameterStore
from cxr.numerics.tensor import Tensor

EPSILON_RANGE = (1e-5, 1e-2)


def finite_difference_gradient(
    loss_fn: Callable[[ParameterStore], float],
    params: ParameterStore,
    epsilon: float = 1e-5,
) -> dict[str, Tensor]:
    """Estimate dL/dθ for every scalar parameter by (f(θ+ε) - f(θ-ε)) / 2ε.

    Parameters are perturbed in place and restored afterwards.
    """
    low, high = EPSILON_RANGE
    if not low <= epsilon <= high:
        raise ConfigurationError(f"epsilon must lie in [{low}, {high}], got {epsilon}")

    estimates: dict[str, Tensor] = {}
    for name, tensor in params.items():
        values = tensor.values
        grad = np.zeros_like(values)
        for index in np.ndindex(values.shape):
            original = values[index]
            values[index] = original + epsilon
            upper = float(loss_fn(params))
            values[index] = original - epsilon
            lower = float(loss_fn(params))
            values[index] = original
            if not (math.isfinite(upper) and math.isfinite(lower)):
                raise GradientOracleError(name, index)
            grad[index] = (upper - lower) / (2.0 * epsilon)
        estimates[name] = Tensor(grad)
    return estimates


def analytic_gradient(
    loss_fn: Callable[[ParameterStore], Tensor],
    params: ParameterStore,
) -> dict[str, np.ndarray]:
    """Run one backward pass and collect the accumulated gradients."""
    params.zero_grads()
    loss_fn(params).backward()
    return {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.values))
        for name, t in params.items()
    }


def max_relative_error(
    analytic: Mapping[str, np.ndarray],
    numeric: Mapping[str, Tensor | np.ndarray],
) -> float:
    """Largest |a - b| / max(1, |a|, |b|) over every scalar of every parameter."""
    worst = 0.0
    for name, a in analytic.items():
        b = numeric[name]
        b = b.values if isinstance(b, Tensor) else np.asarray(b)
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst
