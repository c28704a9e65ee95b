"""Differentiable operations beyond the arithmetic operators on `Tensor`."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from cxr.errors import ShapeError
from cxr.numerics.tensor import Function, MatMul, Sum, Tensor, ordered_matmul, sorted_sum


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a [m x k] and b [k x n]."""
    if a.ndim != 2 or b.ndim != 2 or a.dims[1] != b.dims[0]:
        raise ShapeError(f"matmul shape mismatch: {a.dims} @ {b.dims}")
    return MatMul.apply(a, b)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else out + bias


class Crop(Function):
    """Leading block x[:n0, :n1, ...] of an array."""

    def forward(self, a: np.ndarray, sizes: tuple[int, ...]) -> np.ndarray:
        if len(sizes) > a.ndim or any(n > d for n, d in zip(sizes, a.shape)):
            raise ShapeError(f"cannot crop {a.shape} to leading sizes {sizes}")
        self.shape = a.shape
        self.key = tuple(slice(0, n) for n in sizes)
        return a[self.key].copy()

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(self.shape)
        out[self.key] = grad
        return (out,)


def crop(x: Tensor, *sizes: int) -> Tensor:
    return Crop.apply(x, sizes=sizes)


def ordered_sum(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Sum along `axis` whose value does not depend on the order of the summed terms."""
    return Sum.apply(x, axis=axis, keepdims=keepdims, ordered=True)


class Softmax(Function):
    def forward(
        self,
        x: np.ndarray,
        axis: int,
        mask: np.ndarray | None = None,
        ordered: bool = False,
    ) -> np.ndarray:
        if mask is not None:
            try:
                mask = np.broadcast_to(mask, x.shape)
            except ValueError as exc:
                raise ShapeError(f"softmax mask {mask.shape} does not fit input {x.shape}") from exc
            x = np.where(mask, x, -np.inf)
        peak = x.max(axis=axis, keepdims=True)
        # fully masked slices keep a zero shift and produce all-zero output
        peak = np.where(np.isfinite(peak), peak, 0.0)
        exps = np.exp(x - peak)
        if ordered:
            denom = sorted_sum(exps, axis, keepdims=True)
        else:
            denom = exps.sum(axis=axis, keepdims=True)
        out = np.divide(exps, denom, out=np.zeros_like(exps), where=denom > 0)
        self.out, self.axis = out, axis
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        y = self.out
        return (y * (grad - (grad * y).sum(axis=self.axis, keepdims=True)),)


def softmax(
    x: Tensor,
    axis: int = -1,
    mask: np.ndarray | None = None,
    ordered: bool = False,
) -> Tensor:
    """Max-shifted softmax along `axis`.

    Entries where `mask` is False get probability 0; a slice with no unmasked entry is all
    zeros. `ordered=True` sums the normaliser in sorted order.
    """
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for dims {x.dims}")
    return Softmax.apply(x, axis=axis, mask=mask, ordered=ordered)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = expit(x)
        return self.out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.out * (1.0 - self.out),)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


class Relu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.active = x > 0
        return np.where(self.active, x, 0.0)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.active,)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int) -> np.ndarray:
        self.axis = axis
        self.bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as exc:
            shapes = ", ".join(str(a.shape) for a in arrays)
            raise ShapeError(f"concat along axis {axis} mismatch: {shapes}") from exc

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(grad, self.bounds, axis=self.axis))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


class Conv2d(Function):
    """Stride-1 'same' convolution of x [b, C, H, W] with weight [Cout, C, k, k]."""

    def forward(self, x: np.ndarray, weight: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
            raise ShapeError(f"conv2d shape mismatch: input {x.shape}, weight {weight.shape}")
        batch, channels, height, width = x.shape
        out_channels, _, kernel, _ = weight.shape
        pad = kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))
        # rows are output pixels, columns are (channel, ky, kx) taps
        self.columns = windows.transpose(0, 2, 3, 1, 4, 5).reshape(
            batch * height * width, channels * kernel * kernel
        )
        self.kernel_matrix = weight.reshape(out_channels, -1).T
        self.x_shape, self.w_shape = x.shape, weight.shape
        out = ordered_matmul(self.columns, self.kernel_matrix)
        return np.ascontiguousarray(
            out.reshape(batch, height, width, out_channels).transpose(0, 3, 1, 2)
        )

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        batch, channels, height, width = self.x_shape
        out_channels, _, kernel, _ = self.w_shape
        pad = kernel // 2
        grad_rows = grad.transpose(0, 2, 3, 1).reshape(-1, out_channels)
        grad_weight = (self.columns.T @ grad_rows).T.reshape(self.w_shape)
        grad_columns = (grad_rows @ self.kernel_matrix.T).reshape(
            batch, height, width, channels, kernel, kernel
        )
        grad_padded = np.zeros((batch, channels, height + 2 * pad, width + 2 * pad))
        for dy in range(kernel):
            for dx in range(kernel):
                grad_padded[:, :, dy : dy + height, dx : dx + width] += grad_columns[
                    :, :, :, :, dy, dx
                ].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, pad : pad + height, pad : pad + width]
        return np.ascontiguousarray(grad_x), grad_weight


def conv2d(x: Tensor, weight: Tensor) -> Tensor:
    return Conv2d.apply(x, weight)


class AvgPool2d(Function):
    """2x2 average pooling with stride 2; a trailing odd row or column is dropped."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
            raise ShapeError(f"avg_pool2d needs [b, C, H>=2, W>=2], got {x.shape}")
        batch, channels, height, width = x.shape
        self.shape = x.shape
        h2, w2 = height // 2, width // 2
        cropped = x[:, :, : 2 * h2, : 2 * w2]
        return cropped.reshape(batch, channels, h2, 2, w2, 2).mean(axis=(3, 5))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        spread = np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) / 4.0
        out = np.zeros(self.shape)
        out[:, :, : spread.shape[2], : spread.shape[3]] = spread
        return (out,)


def avg_pool2d(x: Tensor) -> Tensor:
    return AvgPool2d.apply(x)
