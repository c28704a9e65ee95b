"""Rectified Adam updates."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cxr.errors import OptimizerUsageError
from cxr.numerics import ParameterStore
from cxr.training import RAdamState, radam_step


def _quadratic_step(store: ParameterStore, state: RAdamState) -> float:
    w = store["w"]
    loss = (w * w).sum()
    loss.backward()
    radam_step(store, state)
    return loss.item()


def test_first_step_is_plain_gradient_step() -> None:
    state = RAdamState(learning_rate=0.01)
    assert state.rho(1) < 4.0
    assert state.rectification(1) is None
    store = ParameterStore()
    w = store.add("w", [1.0, -2.0, 0.5])
    w.grad = np.array([0.3, -0.7, 2.0])
    radam_step(store, state)
    np.testing.assert_allclose(w.values, [1.0 - 0.003, -2.0 + 0.007, 0.5 - 0.02], atol=1e-15)
    assert state.step == 1
    assert w.grad is None


def test_rectification_switches_on_once_variance_is_tractable() -> None:
    state = RAdamState()
    switch = next(t for t in range(1, 20) if state.rectification(t) is not None)
    assert state.rho(switch) > 4.0 >= state.rho(switch - 1)
    assert 0.0 < state.rectification(switch) < 1.0
    assert state.rectification(100_000) == pytest.approx(1.0, abs=1e-3)


def test_zero_gradient_leaves_parameters_unchanged() -> None:
    state = RAdamState(learning_rate=0.1)
    store = ParameterStore()
    w = store.add("w", [0.25, -4.0])
    for expected_step in range(1, 11):
        w.grad = np.zeros(2)
        radam_step(store, state)
        assert state.step == expected_step
    assert w.values.tolist() == [0.25, -4.0]


def test_quadratic_loss_decreases() -> None:
    state = RAdamState(learning_rate=0.05)
    store = ParameterStore()
    store.add("w", [3.0, -2.0, 1.5])
    losses = [_quadratic_step(store, state) for _ in range(200)]
    # r_t stays well below 1 over the first few hundred steps
    assert losses[-1] < 0.5 * losses[0]
    assert all(b < a for a, b in zip(losses[:20], losses[1:20]))


def _reference_radam(
    start: float, grads: list[float], lr: float, beta1: float = 0.9, beta2: float = 0.999
) -> list[float]:
    """Scalar RAdam written out step by step."""
    rho_inf = 2.0 / (1.0 - beta2) - 1.0
    w, m, v, path = start, 0.0, 0.0, []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        rho_t = rho_inf - 2.0 * t * beta2**t / (1.0 - beta2**t)
        if rho_t > 4.0:
            r = math.sqrt(
                (rho_t - 4.0) * (rho_t - 2.0) * rho_inf
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
            )
            w -= lr * r * m_hat / (math.sqrt(v / (1.0 - beta2**t)) + 1e-8)
        else:
            w -= lr * m_hat
        path.append(w)
    return path


@pytest.mark.parametrize("seed", range(3))
def test_updates_follow_the_rectified_recurrence(seed: int) -> None:
    rng = np.random.default_rng(seed)
    starts = rng.normal(size=3)
    grads = rng.normal(size=(40, 3))
    state = RAdamState(learning_rate=0.01)
    store = ParameterStore()
    w = store.add("w", starts)
    trajectory = []
    for g in grads:
        w.grad = g.copy()
        radam_step(store, state)
        trajectory.append(w.values.copy())
    for k in range(3):
        expected = _reference_radam(float(starts[k]), grads[:, k].tolist(), lr=0.01)
        np.testing.assert_allclose(
            [step[k] for step in trajectory], expected, rtol=1e-12, atol=1e-12
        )


def test_step_without_gradients_raises() -> None:
    store = ParameterStore()
    store.add("w", [1.0])
    store.add("v", [1.0])
    store["w"].grad = np.ones(1)
    state = RAdamState()
    with pytest.raises(OptimizerUsageError):
        radam_step(store, state)
    assert state.step == 0


def test_frozen_parameters_are_skipped() -> None:
    store = ParameterStore()
    w = store.add("w", [1.0])
    frozen = store.add("enc", [2.0])
    w.grad = np.ones(1)
    state = RAdamState(learning_rate=0.1, frozen=frozenset({"enc"}))
    radam_step(store, state)
    assert frozen.values.tolist() == [2.0]
    assert w.values[0] == pytest.approx(0.9)
    assert "enc" not in state.first_moment
