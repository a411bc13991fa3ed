"""
src/nets/critic.py

Critic phi: maps images to an embedding that defines the cosine transport cost. It is pretrained
with a domain-classification head and frozen afterwards; gradients still flow through it to the
images when its parameters are frozen.

Top-level declarations:
- critic_embed: Unnormalized embedding per image
- critic_logits: Domain logits (pretraining only)
- critic_features / critic_predict: Chunked embeddings and domain predictions for image arrays
"""

from __future__ import annotations

import numpy as np

from src.tensor import ShapeError, Tensor
from src.tensor.layers import conv2d, global_avg_pool, linear
from src.tensor.ops import relu

from .types import Params


def critic_embed(p: Params, x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"critic expects an NCHW batch, got {x.shape}")
    h = x
    for stage in range(3):
        h = relu(conv2d(h, p[f"conv{stage}.weight"], p[f"conv{stage}.bias"], stride=2, padding=1))
    return linear(global_avg_pool(h), p["embed.weight"], p["embed.bias"])


def critic_logits(p: Params, x: Tensor) -> Tensor:
    return linear(critic_embed(p, x), p["head.weight"], p["head.bias"])


def critic_features(p: Params, images: np.ndarray, chunk: int = 128) -> np.ndarray:
    # Embeddings as a plain array, computed in chunks
    parts = [critic_embed(p, Tensor(images[i : i + chunk])).data for i in range(0, images.shape[0], chunk)]
    return np.concatenate(parts) if parts else np.zeros((0, p["embed.weight"].shape[0]))


def critic_predict(p: Params, images: np.ndarray, chunk: int = 128) -> np.ndarray:
    parts = [
        np.argmax(critic_logits(p, Tensor(images[i : i + chunk])).data, axis=1)
        for i in range(0, images.shape[0], chunk)
    ]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
