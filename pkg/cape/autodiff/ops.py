"""Differentiable primitives over ``Tensor``.

Each function computes its forward value with numpy and registers a backward
closure returning one gradient per parent (``None`` for non-differentiable
inputs). Binary elementwise operations follow numpy broadcasting; gradients
are summed back to each operand's shape.
"""

import builtins
from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.special import expit

from cape.autodiff.tensor import Tensor, record
from cape.exceptions import NonFiniteError, ShapeMismatchError


def as_tensor(value: Any) -> Tensor:
    """Return ``value`` unchanged if it is a tensor, else wrap it as a constant."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_operands(op: str, a: Any, b: Any) -> tuple[Tensor, Tensor]:
    ta, tb = as_tensor(a), as_tensor(b)
    try:
        np.broadcast_shapes(ta.shape, tb.shape)
    except ValueError:
        raise ShapeMismatchError(op, ta.shape, tb.shape) from None
    return ta, tb


def add(a: Any, b: Any) -> Tensor:
    ta, tb = _broadcast_operands("add", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return _unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)

    return record("add", ta.data + tb.data, (ta, tb), backward)


def sub(a: Any, b: Any) -> Tensor:
    ta, tb = _broadcast_operands("sub", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return _unbroadcast(g, ta.shape), _unbroadcast(-g, tb.shape)

    return record("sub", ta.data - tb.data, (ta, tb), backward)


def mul(a: Any, b: Any) -> Tensor:
    ta, tb = _broadcast_operands("mul", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return _unbroadcast(g * tb.data, ta.shape), _unbroadcast(g * ta.data, tb.shape)

    return record("mul", ta.data * tb.data, (ta, tb), backward)


def div(a: Any, b: Any) -> Tensor:
    ta, tb = _broadcast_operands("div", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (
            _unbroadcast(g / tb.data, ta.shape),
            _unbroadcast(-g * ta.data / (tb.data * tb.data), tb.shape),
        )

    return record("div", ta.data / tb.data, (ta, tb), backward)


def neg(a: Any) -> Tensor:
    ta = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (-g,)

    return record("neg", -ta.data, (ta,), backward)


def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product of two 2-D tensors.

    Raises:
        ShapeMismatchError: If either operand is not 2-D or inner extents differ.
    """
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim != 2 or tb.ndim != 2 or ta.shape[1] != tb.shape[0]:
        raise ShapeMismatchError("matmul", ta.shape, tb.shape)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return g @ tb.data.T, ta.data.T @ g

    return record("matmul", ta.data @ tb.data, (ta, tb), backward)


def transpose(a: Any, axes: Sequence[int] | None = None) -> Tensor:
    ta = as_tensor(a)
    perm = tuple(reversed(range(ta.ndim))) if axes is None else tuple(axes)
    inverse = tuple(int(i) for i in np.argsort(perm))

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (np.transpose(g, inverse),)

    return record("transpose", np.ascontiguousarray(np.transpose(ta.data, perm)), (ta,), backward)


def reshape(a: Any, shape: Sequence[int]) -> Tensor:
    ta = as_tensor(a)
    try:
        out = ta.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError("reshape", ta.shape, tuple(shape)) from None

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g.reshape(ta.shape),)

    return record("reshape", out.copy(), (ta,), backward)


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatchError("concat", *(p.shape for p in parts)) from None
    offsets = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return tuple(np.split(g, offsets, axis=axis))

    return record("concat", out, tuple(parts), backward)


def stack(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatchError("stack", *(p.shape for p in parts)) from None

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return record("stack", out, tuple(parts), backward)


def _is_basic_index(index: Any) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, slice | int) or p is None or p is Ellipsis for p in parts)


def getitem(a: Any, index: Any) -> Tensor:
    """Indexing and slicing; integer-array gathers scatter-add in the backward pass."""
    ta = as_tensor(a)
    out = np.array(ta.data[index], dtype=np.float64)
    basic = _is_basic_index(index)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        full = np.zeros_like(ta.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return record("getitem", out, (ta,), backward)


def sum(a: Any, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    ta = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, ta.shape).copy(),)

    return record("sum", np.asarray(ta.data.sum(axis=axis, keepdims=keepdims)), (ta,), backward)


def mean(a: Any, axis: int | None = None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    count = ta.size if axis is None else ta.shape[axis]
    return div(sum(ta, axis=axis, keepdims=keepdims), float(count))


def exp(a: Any) -> Tensor:
    ta = as_tensor(a)
    out = np.exp(ta.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * out,)

    return record("exp", out, (ta,), backward)


def log(a: Any) -> Tensor:
    ta = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g / ta.data,)

    return record("log", np.log(ta.data), (ta,), backward)


def relu(a: Any) -> Tensor:
    ta = as_tensor(a)
    mask = ta.data > 0

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * mask,)

    return record("relu", np.where(mask, ta.data, 0.0), (ta,), backward)


def sigmoid(a: Any) -> Tensor:
    ta = as_tensor(a)
    out = expit(ta.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * out * (1.0 - out),)

    return record("sigmoid", out, (ta,), backward)


def softplus(a: Any) -> Tensor:
    """Numerically stable ``log(1 + exp(x))``."""
    ta = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * expit(ta.data),)

    return record("softplus", np.logaddexp(0.0, ta.data), (ta,), backward)


def power(a: Any, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for a constant exponent (0 or >= 1).

    Raises:
        ValueError: If the exponent lies in ``(-inf, 0)`` or ``(0, 1)``.
    """
    if exponent != 0 and exponent < 1:
        raise ValueError(f"exponent must be 0 or >= 1, got {exponent}")
    ta = as_tensor(a)
    if exponent == 0:
        return record("power", np.ones_like(ta.data), (ta,), lambda g: (np.zeros_like(g),))

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * exponent * np.power(ta.data, exponent - 1.0),)

    return record("power", np.power(ta.data, exponent), (ta,), backward)


def abs(a: Any) -> Tensor:  # noqa: A001
    ta = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (g * np.sign(ta.data),)

    return record("abs", np.abs(ta.data), (ta,), backward)


def softmax(a: Any, axis: int = -1) -> Tensor:
    """Softmax along ``axis``, stabilized by subtracting the slice maximum.

    Raises:
        NonFiniteError: If the input contains NaN or infinite values.
    """
    ta = as_tensor(a)
    if not np.all(np.isfinite(ta.data)):
        raise NonFiniteError(f"softmax received non-finite input of shape {ta.shape}")
    shifted = ta.data - ta.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record("softmax", out, (ta,), backward)


def layer_norm(
    x: Any, gamma: Any, beta: Any, axis: int = 0, eps: float = 1e-5
) -> Tensor:
    """Normalize ``x`` along ``axis`` then apply an affine ``gamma``/``beta``."""
    tx, tg, tb = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = tx.data.mean(axis=axis, keepdims=True)
    centered = tx.data - mu
    var = (centered * centered).mean(axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    try:
        out = xhat * tg.data + tb.data
    except ValueError:
        raise ShapeMismatchError("layer_norm", tx.shape, tg.shape, tb.shape) from None

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        dxhat = g * tg.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=axis, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True)
        )
        return dx, _unbroadcast(g * xhat, tg.shape), _unbroadcast(g, tb.shape)

    return record("layer_norm", out, (tx, tg, tb), backward)


def total(tensors: Sequence[Tensor]) -> Tensor:
    """Sum a sequence of tensors of equal shape (zero scalar when empty)."""
    if not tensors:
        return Tensor(0.0)
    return builtins.sum(tensors[1:], start=tensors[0])
