"""
src/tensor/ops.py

Elementwise and structural differentiable ops: add, sub, mul, scale, matmul, relu, tanh, sqrt,
clamp_min, sum, mean, reshape, transpose, concat, broadcast, row slicing and weighted sums.

Top-level declarations:
- as_tensor: Wrap arrays/scalars as constant tensors
- add / sub / mul / scale / div: Broadcasting arithmetic
- matmul / transpose: 2-D linear algebra
- relu / tanh / sqrt / clamp_min / abs_: Pointwise nonlinearities
- sum_ / mean: Reductions over all or selected axes
- reshape / concat / broadcast_to / take_rows: Structural ops
- weighted_sum: Frobenius inner product with a constant weight matrix
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .tensor import Tensor, make_result
from .types import ShapeError

Axes = Optional[int | Tuple[int, ...]]


def as_tensor(value: object) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    # Sum a broadcast gradient back down to `shape`
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return make_result(
        a.data + b.data,
        "add",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    return make_result(
        a.data - b.data,
        "sub",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    return make_result(
        a.data * b.data,
        "mul",
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    return make_result(
        out,
        "div",
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return make_result(a.data * factor, "scale", (a,), lambda g: (g * factor,), {"factor": factor})


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return make_result(
        a.data @ b.data,
        "matmul",
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got {a.shape}")
    return make_result(a.data.T, "transpose", (a,), lambda g: (g.T,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return make_result(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_result(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def sqrt(a: Tensor) -> Tensor:
    if (a.data < 0).any():
        raise ValueError("sqrt of a negative entry")
    out = np.sqrt(a.data)
    # derivative taken as 0 at exact zeros
    inv = np.divide(0.5, out, out=np.zeros_like(out), where=out > 0)
    return make_result(out, "sqrt", (a,), lambda g: (g * inv,))


def clamp_min(a: Tensor, floor: float) -> Tensor:
    # max(a, floor); gradient passes only where a > floor
    mask = a.data > floor
    return make_result(
        np.where(mask, a.data, floor), "clamp_min", (a,), lambda g: (g * mask,), {"floor": floor}
    )


def abs_(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return make_result(np.abs(a.data), "abs", (a,), lambda g: (g * sign,))


def _expand(g: np.ndarray, shape: Tuple[int, ...], axis: Axes, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a: Tensor, axis: Axes = None, keepdims: bool = False) -> Tensor:
    return make_result(
        a.data.sum(axis=axis, keepdims=keepdims),
        "sum",
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims),),
        {"axis": axis},
    )


def mean(a: Tensor, axis: Axes = None, keepdims: bool = False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size // max(out.size, 1)
    return make_result(
        out,
        "mean",
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims) / count,),
        {"axis": axis},
    )


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}")
    return make_result(out, "reshape", (a,), lambda g: (g.reshape(a.shape),), {"shape": list(shape)})


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    # Concatenate along `axis` (axis 1 is the channel axis for NCHW)
    parts = tuple(tensors)
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in parts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}")
    bounds = np.cumsum([t.shape[axis] for t in parts])[:-1]
    return make_result(
        out, "concat", parts, lambda g: tuple(np.split(g, bounds, axis=axis)), {"axis": axis}
    )


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    target = tuple(shape)
    try:
        out = np.broadcast_to(a.data, target)
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {target}")
    return make_result(out, "broadcast", (a,), lambda g: (_unbroadcast(g, a.shape),), {"shape": list(target)})


def take_rows(a: Tensor, start: int, stop: int) -> Tensor:
    # Rows [start, stop) of the leading axis
    if not 0 <= start < stop <= a.shape[0]:
        raise ShapeError(f"take_rows: bad range [{start}, {stop}) for leading extent {a.shape[0]}")

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return make_result(a.data[start:stop], "take_rows", (a,), vjp, {"start": start, "stop": stop})


def weighted_sum(a: Tensor, weights: np.ndarray) -> Tensor:
    # sum(weights * a) with constant weights; d/da = weights exactly
    if weights.shape != a.shape:
        raise ShapeError(f"weighted_sum: weights {weights.shape} vs tensor {a.shape}")
    w = np.array(weights, copy=True)
    return make_result(np.sum(w * a.data), "weighted_sum", (a,), lambda g: (g * w,))
