"""Dense float64 tensors with a reverse-mode gradient contract.

Every differentiable operation is a `Function` subclass: `forward` maps numpy arrays to a
numpy array, `backward` maps the upstream gradient dL/d[out] to one gradient per input.
Gradients accumulate additively into leaf tensors; callers zero them between steps.

Forward reductions that mix rows (matrix products) run in a fixed, index-ascending order
so a row's result never depends on where it sits in the batch.
"""

from __future__ import annotations

from typing import Any, Sequence, Union

import numpy as np

from cxr.errors import ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]


def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product accumulated sequentially over the inner dimension.

    out[i, j] = (((a[i,0] b[0,j]) + a[i,1] b[1,j]) + ...) for every (i, j), independent of
    the other rows of `a`.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k])
    return out


def sorted_sum(a: np.ndarray, axis: int, keepdims: bool = False) -> np.ndarray:
    """Sum of the sorted values along `axis`, accumulated one term at a time.

    Elementwise accumulation fixes the rounding order independently of memory layout and
    alignment, so any permutation of the terms gives a bit-identical result.
    """
    terms = np.moveaxis(np.sort(a, axis=axis), axis, 0)
    out = np.zeros(terms.shape[1:], dtype=np.float64)
    for term in terms:
        out += term
    return np.expand_dims(out, axis) if keepdims else out


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so `grad` matches `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Function:
    """Base class for differentiable operations."""

    def __init__(self, *inputs: Tensor) -> None:
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        func = cls(*inputs)
        out = func.forward(*(t.values for t in inputs), **kwargs)
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None)


class Tensor:
    """Dense row-major float64 array with an optional gradient slot."""

    __array_priority__ = 1000

    def __init__(
        self,
        values: ArrayLike,
        *,
        requires_grad: bool = False,
        creator: Function | None = None,
    ) -> None:
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.creator = creator

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got dims {self.dims}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.values.copy())

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate dL/d[self] to every leaf that requires a gradient."""
        if grad is None:
            if self.values.size != 1:
                raise ShapeError(
                    f"backward() without a seed gradient needs a scalar, got dims {self.dims}"
                )
            grad = np.ones_like(self.values)
        elif grad.shape != self.dims:
            raise ShapeError(f"seed gradient shape {grad.shape} does not match {self.dims}")

        pending: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(self._topological_order()):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node.creator is None:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue
            input_grads = node.creator.backward(node_grad)
            for parent, parent_grad in zip(node.creator.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    def _topological_order(self) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.inputs:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))
        return order

    # operators

    def __add__(self, other: Tensor | float) -> Tensor:
        return Add.apply(self, as_tensor(other))

    def __radd__(self, other: float) -> Tensor:
        return Add.apply(as_tensor(other), self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return Add.apply(self, Neg.apply(as_tensor(other)))

    def __rsub__(self, other: float) -> Tensor:
        return Add.apply(as_tensor(other), Neg.apply(self))

    def __neg__(self) -> Tensor:
        return Neg.apply(self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return Mul.apply(self, as_tensor(other))

    def __rmul__(self, other: float) -> Tensor:
        return Mul.apply(as_tensor(other), self)

    def __truediv__(self, other: float) -> Tensor:
        if isinstance(other, Tensor):
            return Mul.apply(self, Pow.apply(other, exponent=-1.0))
        return Mul.apply(self, Tensor(1.0 / float(other)))

    def __pow__(self, exponent: float) -> Tensor:
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other: Tensor) -> Tensor:
        return MatMul.apply(self, other)

    def reshape(self, *shape: int) -> Tensor:
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes: int) -> Tensor:
        return Transpose.apply(self, axes=axes)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return Mean.apply(self, axis=axis, keepdims=keepdims)


def as_tensor(value: Tensor | ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op} shape mismatch: {a.shape} and {b.shape}") from exc


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a, b, "add")
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Neg(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return -a

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (-grad,)


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a, b, "mul")
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            unbroadcast(grad * self.b, self.a.shape),
            unbroadcast(grad * self.a, self.b.shape),
        )


class Pow(Function):
    def forward(self, a: np.ndarray, exponent: float) -> np.ndarray:
        self.a, self.exponent = a, exponent
        return np.power(a, exponent)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.exponent * np.power(self.a, self.exponent - 1.0),)


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return ordered_matmul(a, b)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad @ self.b.T, self.a.T @ grad


class Sum(Function):
    """Sum over axes; `ordered=True` reduces the sorted values along one axis.

    Sorting first makes the result independent of the order of the summed terms, so
    aggregations over batch neighbours commute with batch permutations bit-exactly.
    """

    def forward(
        self,
        a: np.ndarray,
        axis: int | tuple[int, ...] | None = None,
        keepdims: bool = False,
        ordered: bool = False,
    ) -> np.ndarray:
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        if ordered:
            if not isinstance(axis, int):
                raise ShapeError(f"ordered sum needs a single axis, got {axis}")
            return sorted_sum(a, axis, keepdims=keepdims)
        return a.sum(axis=axis, keepdims=keepdims)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(
        self,
        a: np.ndarray,
        axis: int | tuple[int, ...] | None = None,
        keepdims: bool = False,
    ) -> np.ndarray:
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        out = a.mean(axis=axis, keepdims=keepdims)
        self.count = a.size // max(np.asarray(out).size, 1)
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"cannot reshape {a.shape} to {shape}") from exc

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        self.axes = axes or tuple(reversed(range(a.ndim)))
        return np.ascontiguousarray(np.transpose(a, self.axes))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(grad, np.argsort(self.axes)),)
