"""
src/ot/cost.py

Cosine transport cost between two feature batches, C_ij = 1 - <f_i, g_j> / (|f_i| |g_j|), with
norms floored at 1e-12.

Top-level declarations:
- NORM_FLOOR: Lower bound applied to feature norms
- cosine_cost_tensor: Differentiable cost matrix on tensors
- cosine_cost_matrix: Cost values with uniform marginals attached
"""

from __future__ import annotations

import numpy as np

from src.tensor import Tensor
from src.tensor.ops import as_tensor, clamp_min, div, matmul, mul, sqrt, sub, sum_, transpose

from .types import CostMatrix, OTInputError

NORM_FLOOR = 1e-12


def _normalize_rows(f: Tensor) -> Tensor:
    norms = clamp_min(sqrt(sum_(mul(f, f), axis=1, keepdims=True)), NORM_FLOOR)
    return div(f, norms)


def cosine_cost_tensor(fa: Tensor, fb: Tensor) -> Tensor:
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise OTInputError(f"feature batches must be n x d and m x d, got {fa.shape} and {fb.shape}")
    similarity = matmul(_normalize_rows(fa), transpose(_normalize_rows(fb)))
    return sub(Tensor(np.ones(similarity.shape)), similarity)


def cosine_cost_matrix(fa: Tensor | np.ndarray, fb: Tensor | np.ndarray) -> CostMatrix:
    cost = cosine_cost_tensor(as_tensor(fa), as_tensor(fb))
    # rounding can push identical/antipodal pairs a hair outside [0, 2]
    return CostMatrix.uniform(np.clip(cost.data, 0.0, 2.0))
