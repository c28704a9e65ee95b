"""Rectified Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cxr.errors import OptimizerUsageError
from cxr.numerics import ParameterStore

RHO_THRESHOLD = 4.0


@dataclass
class RAdamState:
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    frozen: frozenset[str] = frozenset()

    @property
    def rho_infinity(self) -> float:
        return 2.0 / (1.0 - self.beta2) - 1.0

    def rho(self, t: int) -> float:
        beta2_t = self.beta2**t
        return self.rho_infinity - 2.0 * t * beta2_t / (1.0 - beta2_t)

    def rectification(self, t: int) -> float | None:
        """r_t when the variance estimate is tractable (rho_t > 4), otherwise None."""
        rho_t = self.rho(t)
        if rho_t <= RHO_THRESHOLD:
            return None
        rho_inf = self.rho_infinity
        return math.sqrt(
            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
        )


def radam_step(params: ParameterStore, state: RAdamState) -> None:
    """Update every trainable parameter in place, then clear all gradients."""
    trainable = [(name, t) for name, t in params.items() if name not in state.frozen]
    missing = [name for name, t in trainable if t.grad is None]
    if missing:
        raise OptimizerUsageError(
            f"radam_step called before backward(); no gradient for {missing[:3]}"
            + (f" and {len(missing) - 3} more" if len(missing) > 3 else "")
        )

    state.step += 1
    t = state.step
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    rectifier = state.rectification(t)

    for name, tensor in trainable:
        grad = tensor.grad
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(tensor.values)
            v = np.zeros_like(tensor.values)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v

        m_hat = m / bias1
        if rectifier is None:
            tensor.values -= state.learning_rate * m_hat
        else:
            v_hat = np.sqrt(v / bias2)
            tensor.values -= state.learning_rate * rectifier * m_hat / (v_hat + state.epsilon)

    params.zero_grads()
