"""Projection + BatchNorm head applied to the refined node features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cxr.config.schema import Mode
from cxr.errors import InvalidModeError, ShapeError
from cxr.numerics import Tensor, linear


@dataclass
class BatchNormState:
    """Running statistics; updated only by TRAIN-mode forwards."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def neutral(cls, width: int, momentum: float = 0.1, epsilon: float = 1e-5) -> BatchNormState:
        return cls(np.zeros(width), np.ones(width), momentum=momentum, epsilon=epsilon)

    def copy(self) -> BatchNormState:
        return BatchNormState(
            self.running_mean.copy(),
            self.running_var.copy(),
            momentum=self.momentum,
            epsilon=self.epsilon,
        )


@dataclass(frozen=True)
class HeadParams:
    weight: Tensor
    bias: Tensor
    gamma: Tensor
    beta: Tensor


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    mode: Mode,
) -> Tensor:
    """Per-feature normalisation over the batch axis of x [b, d]."""
    if x.ndim != 2 or x.dims[1] != state.running_mean.shape[0]:
        raise ShapeError(f"batch norm expects [b, {state.running_mean.shape[0]}], got {x.dims}")

    if mode is Mode.EVAL:
        inv_std = 1.0 / np.sqrt(state.running_var + state.epsilon)
        normalized = (x - Tensor(state.running_mean)) * Tensor(inv_std)
        return normalized * gamma + beta

    b = x.dims[0]
    if b < 2:
        raise InvalidModeError(f"TRAIN-mode batch norm needs at least 2 samples, got {b}")
    mean = x.mean(axis=0, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=0, keepdims=True)
    normalized = centered * (var + state.epsilon) ** -0.5

    # running variance tracks the unbiased estimate
    m = state.momentum
    state.running_mean = (1.0 - m) * state.running_mean + m * mean.values[0]
    state.running_var = (1.0 - m) * state.running_var + m * var.values[0] * b / (b - 1)
    return normalized * gamma + beta


def project_normalize(
    c_prime: Tensor,
    params: HeadParams,
    state: BatchNormState,
    mode: Mode,
) -> Tensor:
    """v = BatchNorm(Linear(c'))."""
    projected = linear(c_prime, params.weight, params.bias)
    return batch_norm(projected, params.gamma, params.beta, state, mode)
