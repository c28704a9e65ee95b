"""Autograd operations checked against the finite-difference oracle."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
import pytest

from cxr.errors import ConfigurationError, GradientOracleError, ShapeError
from cxr.numerics import (
    ParameterStore,
    Tensor,
    analytic_gradient,
    avg_pool2d,
    concat,
    conv2d,
    crop,
    finite_difference_gradient,
    linear,
    matmul,
    max_relative_error,
    ordered_matmul,
    ordered_sum,
    relu,
    sigmoid,
    softmax,
)

TOLERANCE = 1e-4


def _check(build: Callable[[ParameterStore], Tensor], store: ParameterStore) -> float:
    """Max relative error between backward() and central differences for a scalar loss."""
    analytic = analytic_gradient(build, store)
    numeric = finite_difference_gradient(lambda p: build(p).item(), store, epsilon=1e-5)
    return max_relative_error(analytic, numeric)


def _weighted(out: Tensor, seed: int) -> Tensor:
    """Reduce to a scalar with fixed random weights so every output entry matters."""
    weights = np.random.default_rng(seed).normal(size=out.dims)
    return (out * Tensor(weights)).sum()


def _store(rng: np.random.Generator, **shapes: tuple[int, ...]) -> ParameterStore:
    store = ParameterStore()
    for name, shape in shapes.items():
        store.add(name, rng.normal(size=shape))
    return store


@pytest.mark.parametrize("seed", range(10))
def test_arithmetic_gradients(seed: int) -> None:
    rng = np.random.default_rng(seed)
    store = _store(rng, a=(3, 4), b=(1, 4))
    store["a"].values += 3.0  # keep pow away from zero

    def build(p: ParameterStore) -> Tensor:
        a, b = p["a"], p["b"]
        out = (a + b) * a - b / 2.0 + a**-1.0 - (2.0 - a)
        return _weighted(out.mean(axis=0) + out.sum(axis=0), seed)

    assert _check(build, store) <= TOLERANCE


@pytest.mark.parametrize("seed", range(10))
def test_matmul_linear_reshape_transpose_gradients(seed: int) -> None:
    rng = np.random.default_rng(seed)
    store = _store(rng, x=(5, 3), w=(3, 4), bias=(4,))

    def build(p: ParameterStore) -> Tensor:
        y = linear(p["x"], p["w"], p["bias"])
        z = matmul(y.transpose(1, 0), p["x"]).reshape(2, 6)
        return _weighted(z, seed)

    assert _check(build, store) <= TOLERANCE


@pytest.mark.parametrize("seed", range(10))
def test_softmax_sigmoid_relu_concat_gradients(seed: int) -> None:
    rng = np.random.default_rng(seed)
    store = _store(rng, x=(4, 5), y=(4, 2))
    mask = ~np.eye(4, 5, dtype=bool)

    def build(p: ParameterStore) -> Tensor:
        s = softmax(p["x"], axis=1, mask=mask, ordered=True)
        joined = concat([s, sigmoid(p["y"]), relu(p["y"])], axis=1)
        return _weighted(joined, seed)

    assert _check(build, store) <= TOLERANCE


@pytest.mark.parametrize("seed", range(10))
def test_ordered_sum_and_crop_gradients(seed: int) -> None:
    rng = np.random.default_rng(seed)
    store = _store(rng, table=(4, 4, 3))

    def build(p: ParameterStore) -> Tensor:
        block = crop(p["table"], 3, 3)
        return _weighted(ordered_sum(block * block, axis=1), seed)

    assert _check(build, store) <= TOLERANCE


@pytest.mark.parametrize("seed", range(10))
def test_conv_and_pool_gradients(seed: int) -> None:
    rng = np.random.default_rng(seed)
    store = _store(rng, x=(2, 3, 5, 6), w=(2, 3, 3, 3))

    def build(p: ParameterStore) -> Tensor:
        return _weighted(avg_pool2d(conv2d(p["x"], p["w"])), seed)

    assert _check(build, store) <= TOLERANCE


def test_ordered_matmul_matches_numpy() -> None:
    rng = np.random.default_rng(7)
    a, b = rng.normal(size=(6, 5)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(ordered_matmul(a, b), a @ b, rtol=1e-12, atol=1e-12)


def test_ordered_matmul_rows_do_not_depend_on_batch_neighbours() -> None:
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=(6, 17)), rng.normal(size=(17, 4))
    perm = rng.permutation(6)
    assert np.array_equal(ordered_matmul(a, b)[perm], ordered_matmul(a[perm], b))


def test_ordered_sum_ignores_term_order() -> None:
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 50)) * 10.0 ** rng.integers(-8, 8, size=(3, 50))
    perm = rng.permutation(50)
    forward = ordered_sum(Tensor(x), axis=1).values
    shuffled = ordered_sum(Tensor(x[:, perm]), axis=1).values
    assert np.array_equal(forward, shuffled)


def test_fully_masked_softmax_row_is_zero() -> None:
    x = Tensor(np.ones((1, 1)))
    out = softmax(x, axis=1, mask=np.zeros((1, 1), dtype=bool))
    assert out.values.tolist() == [[0.0]]


def test_softmax_masked_entries_get_zero_probability() -> None:
    x = Tensor(np.arange(9.0).reshape(3, 3))
    out = softmax(x, axis=1, mask=~np.eye(3, dtype=bool)).values
    assert np.all(np.diag(out) == 0.0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_softmax_is_shift_stable() -> None:
    out = softmax(Tensor([[1000.0, 1000.0, 1000.0, 1000.0]]), axis=1).values
    np.testing.assert_allclose(out, 0.25, atol=1e-15)


def test_ordered_sum_ignores_memory_layout() -> None:
    rng = np.random.default_rng(10)
    x = rng.normal(size=(6, 41)) * 10.0 ** rng.integers(-6, 6, size=(6, 41))
    reference = ordered_sum(Tensor(np.ascontiguousarray(x[:, 1:])), axis=1).values
    assert np.array_equal(ordered_sum(Tensor(x[:, 1:]), axis=1).values, reference)
    fortran = np.asfortranarray(x)[:, 1:]
    assert np.array_equal(ordered_sum(Tensor(fortran), axis=1).values, reference)
    shuffled = x[:, 1:][:, rng.permutation(40)]
    assert np.array_equal(ordered_sum(Tensor(shuffled), axis=1).values, reference)
    by_column = ordered_sum(Tensor(np.ascontiguousarray(x.T)), axis=0).values
    assert np.array_equal(ordered_sum(Tensor(x.T), axis=0).values, by_column)


def test_ordered_softmax_ignores_memory_layout() -> None:
    x = np.random.default_rng(11).normal(size=(5, 9)) * 30.0
    contiguous = softmax(Tensor(x), axis=1, ordered=True).values
    fortran = softmax(Tensor(np.asfortranarray(x)), axis=1, ordered=True).values
    assert np.array_equal(contiguous, fortran)


def test_softmax_reference_values() -> None:
    np.testing.assert_allclose(softmax(Tensor([[0.0, 0.0, 0.0, 0.0]])).values, 0.25, atol=1e-15)
    out = softmax(Tensor([[1.0, 2.0, 3.0]])).values
    np.testing.assert_allclose(out, [[0.0900, 0.2447, 0.6652]], atol=1e-4)
    np.testing.assert_allclose(
        out, np.exp([[1.0, 2.0, 3.0]]) / np.exp([1.0, 2.0, 3.0]).sum(), rtol=1e-12
    )


@pytest.mark.parametrize("ordered", [False, True])
def test_softmax_slices_sum_to_one_at_large_magnitude(ordered: bool) -> None:
    rng = np.random.default_rng(12)
    x = rng.uniform(-1e3, 1e3, size=(20, 7))
    out = softmax(Tensor(x), axis=1, ordered=ordered).values
    assert np.all(out >= 0.0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
    shifted = softmax(Tensor(x + 17.5), axis=1, ordered=ordered).values
    np.testing.assert_allclose(shifted, out, atol=1e-12)


def test_sigmoid_reference_values() -> None:
    out = sigmoid(Tensor([0.0, 1.0, 40.0, -40.0])).values
    assert out[0] == 0.5
    assert out[1] == pytest.approx(0.7310585786300049, rel=1e-12)
    assert abs(out[2] - 1.0) <= 1e-12
    assert 0.0 < out[3] <= 1e-12
    assert np.all(np.isfinite(out))


def test_sigmoid_is_symmetric() -> None:
    x = np.random.default_rng(13).uniform(-40.0, 40.0, size=200)
    np.testing.assert_allclose(
        sigmoid(Tensor(-x)).values, 1.0 - sigmoid(Tensor(x)).values, atol=1e-12
    )


def test_matmul_identity_and_zero() -> None:
    a = np.random.default_rng(14).normal(size=(3, 3))
    assert np.array_equal(matmul(Tensor(np.eye(3)), Tensor(a)).values, a)
    assert np.array_equal(matmul(Tensor(a), Tensor(np.zeros((3, 3)))).values, np.zeros((3, 3)))


def _triple_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            total = 0.0
            for k in range(a.shape[1]):
                total += a[i, k] * b[k, j]
            out[i, j] = total
    return out


@pytest.mark.parametrize("shape", [(4, 5, 3), (16, 16, 16), (1, 7, 2)])
def test_matmul_matches_triple_loop(shape: tuple[int, int, int]) -> None:
    m, k, n = shape
    rng = np.random.default_rng(m * 100 + k * 10 + n)
    a, b = rng.normal(size=(m, k)), rng.normal(size=(k, n))
    np.testing.assert_allclose(
        matmul(Tensor(a), Tensor(b)).values, _triple_loop(a, b), rtol=0, atol=1e-12
    )


def test_gradient_of_parameter_sum_is_all_ones() -> None:
    store = ParameterStore()
    store.add("w", [0.5, -1.25, 2.0, 8.0])
    analytic = analytic_gradient(lambda p: p["w"].sum(), store)
    assert analytic["w"].tolist() == [1.0, 1.0, 1.0, 1.0]
    numeric = finite_difference_gradient(
        lambda p: float(p["w"].values.sum()), store, epsilon=1e-3
    )
    np.testing.assert_allclose(numeric["w"].values, 1.0, atol=1e-9)


def test_finite_difference_reports_non_finite_loss() -> None:
    store = ParameterStore()
    store.add("w", [1.0, 2.0])

    def loss(p: ParameterStore) -> float:
        return math.inf if p["w"].values[1] > 2.0 else float(p["w"].values.sum())

    with pytest.raises(GradientOracleError, match=r"'w' at \(1,\)") as caught:
        finite_difference_gradient(loss, store, epsilon=1e-3)
    assert caught.value.exit_code == 2
    assert store["w"].values.tolist() == [1.0, 2.0]


def test_crop_backward_zero_pads_unused_entries() -> None:
    table = Tensor(np.ones((3, 3)), requires_grad=True)
    crop(table, 2, 2).sum().backward()
    assert table.grad is not None
    assert table.grad.tolist() == [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]


def test_gradients_accumulate_until_zeroed() -> None:
    store = ParameterStore()
    w = store.add("w", [2.0])
    (w * w).sum().backward()
    (w * w).sum().backward()
    assert w.grad is not None and w.grad.tolist() == [8.0]
    store.zero_grads()
    assert w.grad is None


def test_matmul_shape_mismatch_raises() -> None:
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_add_broadcast_mismatch_raises() -> None:
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))


def test_backward_without_seed_needs_scalar() -> None:
    with pytest.raises(ShapeError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_finite_difference_rejects_out_of_range_epsilon() -> None:
    store = ParameterStore()
    store.add("w", [1.0])
    with pytest.raises(ConfigurationError):
        finite_difference_gradient(lambda p: p["w"].item(), store, epsilon=1e-8)


def test_finite_difference_of_quadratic() -> None:
    store = ParameterStore()
    store.add("w", [3.0, -1.0])
    numeric = finite_difference_gradient(
        lambda p: float((p["w"].values ** 2).sum()), store, epsilon=1e-3
    )
    np.testing.assert_allclose(numeric["w"].values, [6.0, -2.0], atol=1e-9)
    assert store["w"].values.tolist() == [3.0, -1.0]


def test_parameter_store_load_checks_names_and_shapes() -> None:
    store = ParameterStore()
    store.add("w", np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        store.load({"w": np.zeros(3)})
    with pytest.raises(ConfigurationError):
        store.load({"v": np.zeros((2, 2))})
    with pytest.raises(ConfigurationError):
        store.add("w", np.zeros(1))
