"""
src/nets/classifier.py

Task classifier used both as the trained model F and the frozen pretrained classifier Y-hat:
four 3x3 conv layers of equal width, each followed by relu and 2x2 max-pooling, then a linear
softmax head over the flattened penultimate features.

Top-level declarations:
- classifier_forward: (logits, penultimate features) for an image batch
- classifier_predict: Chunked argmax labels for an image array
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from src.tensor import ShapeError, Tensor
from src.tensor.layers import conv2d, flatten, linear, max_pool2x2
from src.tensor.ops import relu

from .types import Params

NUM_STAGES = 4


def classifier_forward(p: Params, x: Tensor) -> Tuple[Tensor, Tensor]:
    if x.ndim != 4 or x.shape[2] % 16 or x.shape[3] % 16:
        raise ShapeError(f"classifier needs NCHW input with H, W divisible by 16, got {x.shape}")
    h = x
    for stage in range(NUM_STAGES):
        h = conv2d(h, p[f"conv{stage}.weight"], p[f"conv{stage}.bias"], stride=1, padding=1)
        h = max_pool2x2(relu(h))
    features = flatten(h)
    if features.shape[1] != p["head.weight"].shape[1]:
        raise ShapeError(
            f"classifier head expects {p['head.weight'].shape[1]} features, got {features.shape[1]}"
        )
    logits = linear(features, p["head.weight"], p["head.bias"])
    return logits, features


def classifier_predict(p: Params, images: np.ndarray, chunk: int = 128) -> np.ndarray:
    # Argmax labels in fixed-size chunks; parameters should be frozen tensors
    preds = [
        np.argmax(classifier_forward(p, Tensor(images[i : i + chunk]))[0].data, axis=1)
        for i in range(0, images.shape[0], chunk)
    ]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
