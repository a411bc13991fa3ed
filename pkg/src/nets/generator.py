"""
src/nets/generator.py

Conditional conv-deconv generator G(x, k): the one-hot domain code is spatially expanded,
channel-concatenated with the image, and mapped back to an image of the same shape.

Layout: 7x7 stem -> two stride-2 3x3 downs -> two residual blocks -> two stride-2 3x3
transposed convs -> 7x7 output conv with tanh. Instance normalization (eps 1e-5) and relu follow
every conv except the output.

Top-level declarations:
- generator_forward: G(x, code) for a batch sharing one domain code
- residual_block: conv-norm-relu-conv-norm with skip addition
"""

from __future__ import annotations

import numpy as np

from src.tensor import Tensor, ShapeError
from src.tensor.layers import conv2d, conv_transpose2d, instance_norm
from src.tensor.ops import add, concat, relu, tanh

from .types import DomainCode, Params


def _conv_block(
    x: Tensor, p: Params, name: str, stride: int = 1, padding: int = 1
) -> Tensor:
    y = conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=stride, padding=padding)
    return relu(instance_norm(y, p[f"{name}.norm_gain"], p[f"{name}.norm_bias"]))


def _up_block(x: Tensor, p: Params, name: str) -> Tensor:
    y = conv_transpose2d(
        x, p[f"{name}.weight"], p[f"{name}.bias"], stride=2, padding=1, output_padding=1
    )
    return relu(instance_norm(y, p[f"{name}.norm_gain"], p[f"{name}.norm_bias"]))


def residual_block(x: Tensor, p: Params, name: str) -> Tensor:
    # Zeroed convs (with zero norm bias) make this block the identity
    h = _conv_block(x, p, f"{name}.conv_a")
    h = conv2d(h, p[f"{name}.conv_b.weight"], p[f"{name}.conv_b.bias"], stride=1, padding=1)
    h = instance_norm(h, p[f"{name}.conv_b.norm_gain"], p[f"{name}.conv_b.norm_bias"])
    return add(x, h)


def generator_forward(p: Params, x: Tensor, code: DomainCode) -> Tensor:
    # X_out = G(X, k); output shape equals input shape, values in (-1, 1)
    if x.ndim != 4:
        raise ShapeError(f"generator expects an NCHW batch, got {x.shape}")
    n, c, h, w = x.shape
    stem_in = p["stem.weight"].shape[1]
    if stem_in != c + code.length:
        raise ShapeError(
            f"generator stem expects {stem_in} channels, got {c} image + {code.length} code channels"
        )
    if h % 4 or w % 4:
        raise ShapeError(f"generator needs spatial dims divisible by 4, got {h}x{w}")

    planes = np.broadcast_to(code.one_hot.reshape(1, -1, 1, 1), (n, code.length, h, w))
    h0 = concat([x, Tensor(planes)], axis=1)

    h0 = _conv_block(h0, p, "stem", stride=1, padding=3)
    h0 = _conv_block(h0, p, "down1", stride=2, padding=1)
    h0 = _conv_block(h0, p, "down2", stride=2, padding=1)
    h0 = residual_block(h0, p, "res1")
    h0 = residual_block(h0, p, "res2")
    h0 = _up_block(h0, p, "up1")
    h0 = _up_block(h0, p, "up2")
    out = conv2d(h0, p["out.weight"], p["out.bias"], stride=1, padding=3)
    return tanh(out)
