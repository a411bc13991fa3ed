"""
src/tensor/layers.py

Differentiable network layers on NCHW tensors: conv2d, conv_transpose2d (its exact adjoint),
2x2 max-pooling, instance normalization, linear, global average pooling, and the two losses used
by training (softmax cross-entropy, L1).

Convolutions use an im2col formulation: sliding windows over the padded input are gathered with
numpy stride tricks and contracted with the flattened kernel; the scatter back (col2im) walks the
kernel offsets in a fixed order so results are bit-reproducible.

Top-level declarations:
- conv_output_size / conv_transpose_output_size: Geometry formulas
- conv2d: Cross-correlation with stride and zero padding
- conv_transpose2d: Adjoint of conv2d with output_padding
- max_pool2x2: Non-overlapping 2x2 max-pool (first row-major max wins ties)
- instance_norm: Per-sample per-channel normalization with affine gain/bias
- linear: x @ W^T + b
- global_avg_pool: Mean over spatial axes
- softmax_cross_entropy: Mean negative log-likelihood of integer labels
- l1_loss: Mean absolute difference
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import log_softmax, softmax

from .ops import add, matmul, mean, reshape, transpose
from .tensor import Tensor, make_result
from .types import ShapeError


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(
    size: int, kernel: int, stride: int, padding: int, output_padding: int
) -> int:
    return (size - 1) * stride - 2 * padding + kernel + output_padding


def _im2col(xp: np.ndarray, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    # (N, C, Hp, Wp) -> (N*out_h*out_w, C*k*k) window matrix
    n, c = xp.shape[:2]
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :out_h, :out_w]
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * out_h * out_w, c * k * k
    )


def _col2im(
    cols: np.ndarray, padded_shape: Tuple[int, int, int, int], k: int, stride: int, out_h: int, out_w: int
) -> np.ndarray:
    # Adjoint of _im2col: scatter-add window rows back into a padded image
    n, c = padded_shape[:2]
    blocks = cols.reshape(n, out_h, out_w, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    xp = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += blocks[:, :, i, j]
    return xp


def _check_stride(stride: int) -> None:
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")


def conv2d(x: Tensor, w: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    # x: (N, C, H, W), w: (O, C, K, K), bias: (O,)
    _check_stride(stride)
    if x.ndim != 4 or w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d expects NCHW input and OIKK kernel, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    o, ci, k, _ = w.shape
    if ci != c:
        raise ShapeError(f"conv2d: input has {c} channels, kernel expects {ci}")
    out_h = conv_output_size(h, k, stride, padding)
    out_w = conv_output_size(wd, k, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"conv2d: invalid geometry H={h} W={wd} K={k} s={stride} p={padding}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, k, stride, out_h, out_w)
    w_mat = w.data.reshape(o, -1)
    out = (cols @ w_mat.T).reshape(n, out_h, out_w, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)

    def vjp(g: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        g_mat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = (g_mat.T @ cols).reshape(w.shape) if w.requires_grad else None
        dx = None
        if x.requires_grad:
            dxp = _col2im(g_mat @ w_mat, xp.shape, k, stride, out_h, out_w)
            dx = dxp[:, :, padding : padding + h, padding : padding + wd]
        grads: Tuple[Optional[np.ndarray], ...] = (dx, dw)
        if bias is not None:
            grads = grads + (g.sum(axis=(0, 2, 3)),)
        return grads

    parents = (x, w) if bias is None else (x, w, bias)
    return make_result(out, "conv2d", parents, vjp, {"stride": stride, "padding": padding})


def conv_transpose2d(
    x: Tensor,
    w: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    # x: (N, O, H, W), w: (O, C, K, K) -> (N, C, H', W'); adjoint of conv2d with the same w
    _check_stride(stride)
    if x.ndim != 4 or w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv_transpose2d expects NCHW input and OIKK kernel, got {x.shape} and {w.shape}")
    n, o, h, wd = x.shape
    wo, c, k, _ = w.shape
    if wo != o:
        raise ShapeError(f"conv_transpose2d: input has {o} channels, kernel expects {wo}")
    if not 0 <= output_padding < stride:
        raise ShapeError(f"conv_transpose2d: output_padding {output_padding} invalid for stride {stride}")
    out_h = conv_transpose_output_size(h, k, stride, padding, output_padding)
    out_w = conv_transpose_output_size(wd, k, stride, padding, output_padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"conv_transpose2d: invalid geometry H={h} W={wd} K={k} s={stride} p={padding}")

    padded_shape = (n, c, out_h + 2 * padding, out_w + 2 * padding)
    w_mat = w.data.reshape(o, -1)
    x_mat = x.data.transpose(0, 2, 3, 1).reshape(-1, o)
    outp = _col2im(x_mat @ w_mat, padded_shape, k, stride, h, wd)
    out = outp[:, :, padding : padding + out_h, padding : padding + out_w]
    if bias is not None:
        out = out + bias.data.reshape(1, c, 1, 1)

    def vjp(g: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        gp = np.pad(g, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        cols = _im2col(gp, k, stride, h, wd)
        dx = (cols @ w_mat.T).reshape(n, h, wd, o).transpose(0, 3, 1, 2) if x.requires_grad else None
        dw = (x_mat.T @ cols).reshape(w.shape) if w.requires_grad else None
        grads: Tuple[Optional[np.ndarray], ...] = (dx, dw)
        if bias is not None:
            grads = grads + (g.sum(axis=(0, 2, 3)),)
        return grads

    parents = (x, w) if bias is None else (x, w, bias)
    attrs = {"stride": stride, "padding": padding, "output_padding": output_padding}
    return make_result(out, "conv_transpose2d", parents, vjp, attrs)


def max_pool2x2(x: Tensor) -> Tensor:
    # Gradient routes to the first row-major maximum of each window
    if x.ndim != 4:
        raise ShapeError(f"max_pool2x2 expects NCHW, got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"max_pool2x2 needs even spatial dims, got {h}x{w}")
    windows = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, h // 2, w // 2, 4
    )
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        routed = np.zeros((n, c, h // 2, w // 2, 4), dtype=g.dtype)
        np.put_along_axis(routed, arg[..., None], g[..., None], axis=-1)
        dx = routed.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (dx,)

    return make_result(out, "max_pool2x2", (x,), vjp)


def instance_norm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-5) -> Tensor:
    # Per-sample per-channel zero-mean unit-variance, then channel affine
    if x.ndim != 4:
        raise ShapeError(f"instance_norm expects NCHW, got {x.shape}")
    c = x.shape[1]
    if gain.shape != (c,) or bias.shape != (c,):
        raise ShapeError(f"instance_norm: gain/bias must have shape ({c},)")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=(2, 3), keepdims=True) + epsilon)
    xhat = centered * inv_std
    g_ = gain.data.reshape(1, c, 1, 1)
    out = xhat * g_ + bias.data.reshape(1, c, 1, 1)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * g_
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=(2, 3), keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=(2, 3), keepdims=True)
        )
        return dx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

    return make_result(out, "instance_norm", (x, gain, bias), vjp, {"epsilon": epsilon})


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    # x: (N, D), w: (O, D), b: (O,)
    return add(matmul(x, transpose(w)), b)


def global_avg_pool(x: Tensor) -> Tensor:
    return mean(x, axis=(2, 3))


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], -1))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    # Mean over the batch of -log softmax at the true label (max-shift stabilized)
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects N x C logits, got {logits.shape}")
    n, c = logits.shape
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise ShapeError(f"softmax_cross_entropy: {y.shape[0]} labels for {n} rows")
    if (y < 0).any() or (y >= c).any():
        raise ValueError(f"softmax_cross_entropy: labels must lie in [0, {c})")
    rows = np.arange(n)
    log_probs = log_softmax(logits.data, axis=1)
    loss = -log_probs[rows, y].mean()

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        d = softmax(logits.data, axis=1)
        d[rows, y] -= 1.0
        return (g * d / n,)

    return make_result(np.asarray(loss), "softmax_cross_entropy", (logits,), vjp)


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    # Mean absolute difference; subgradient 0 at exact ties
    if a.shape != b.shape:
        raise ShapeError(f"l1_loss: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    sign = np.sign(diff)
    count = diff.size
    return make_result(
        np.asarray(np.abs(diff).mean()),
        "l1_loss",
        (a, b),
        lambda g: (g * sign / count, -g * sign / count),
    )
