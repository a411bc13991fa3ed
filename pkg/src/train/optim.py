"""
src/train/optim.py

Functional optimizers over named parameter arrays. Each step returns new parameter arrays and a
new state; inputs are never modified.

Top-level declarations:
- sgd_step: SGD with momentum and L2 weight decay
- adam_step: Adam with bias correction
- step_lr: Learning rate after the step decay point
- global_norm: L2 norm over a gradient dict
"""

from __future__ import annotations

from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from src.tensor import ShapeError

from .types import AdamState, SGDState

Arrays = Dict[str, np.ndarray]


def _check_shapes(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
    for name, value in params.items():
        if name not in grads:
            raise ShapeError(f"no gradient for parameter '{name}'")
        if grads[name].shape != value.shape:
            raise ShapeError(f"gradient for '{name}' has shape {grads[name].shape}, parameter {value.shape}")


def sgd_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
    state: SGDState | None = None,
) -> Tuple[Arrays, SGDState]:
    # v <- momentum * v + (g + wd * p); p <- p - lr * v
    _check_shapes(params, grads)
    previous = state.velocity if state is not None else {}
    new_params: Arrays = {}
    velocity: Arrays = {}
    for name, p in params.items():
        g = grads[name] + weight_decay * p if weight_decay else grads[name]
        v = momentum * previous[name] + g if name in previous else np.array(g, copy=True)
        velocity[name] = v
        new_params[name] = p - lr * v
    return new_params, SGDState(velocity=velocity)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: float,
    betas: Sequence[float] = (0.5, 0.999),
    eps: float = 1e-8,
    state: AdamState | None = None,
) -> Tuple[Arrays, AdamState]:
    _check_shapes(params, grads)
    state = state or AdamState()
    beta1, beta2 = betas
    step = state.step + 1
    m: Arrays = {}
    v: Arrays = {}
    new_params: Arrays = {}
    for name, p in params.items():
        g = grads[name]
        m_prev = state.m.get(name, np.zeros_like(p))
        v_prev = state.v.get(name, np.zeros_like(p))
        m[name] = beta1 * m_prev + (1.0 - beta1) * g
        v[name] = beta2 * v_prev + (1.0 - beta2) * g * g
        m_hat = m[name] / (1.0 - beta1**step)
        v_hat = v[name] / (1.0 - beta2**step)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(step=step, m=m, v=v)


def step_lr(base_lr: float, iteration: int, total: int, decay_at: float, decay: float) -> float:
    # Multiply by `decay` once iteration reaches decay_at * total
    if total > 0 and iteration >= int(decay_at * total):
        return base_lr * decay
    return base_lr


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
