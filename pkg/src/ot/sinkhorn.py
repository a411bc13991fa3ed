"""
src/ot/sinkhorn.py

Entropic optimal transport by log-domain Sinkhorn iterations on dual potentials, the
differentiable Sinkhorn distance used by training, and its envelope-rule gradient.

The plan M minimizes <M, C> + eps * KL(M | a b^T) under the marginal constraints. The reported
distance is the sharp cost <M, C>. Gradients treat M as a constant, so d/dC = M: exact for the
regularized value by the envelope theorem, and the standard surrogate for the sharp cost.

Top-level declarations:
- round_to_marginals: Project a nonnegative matrix onto the transport polytope
- sinkhorn: Solve for the plan; returns (TransportPlan, sharp_cost, regularized_value)
- sinkhorn_distance: Differentiable W(Fa, Fb) through the detached plan
- ot_gradient_wrt_features: Gradients of W w.r.t. both feature batches
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from src.tensor import Tensor, grad
from src.tensor.ops import as_tensor, weighted_sum

from .cost import cosine_cost_tensor
from .types import CostMatrix, OTInputError, SinkhornSettings, TransportPlan

logger = logging.getLogger(__name__)


# Annealing: epsilon starts at max(C) and shrinks by SCALING_FACTOR per stage down to the target.
# Intermediate stages stop at STAGE_TOLERANCE or after STAGE_ITERATIONS updates.
SCALING_FACTOR = 0.5
STAGE_TOLERANCE = 1e-3
STAGE_ITERATIONS = 100


def _plan(c: np.ndarray, f: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    return np.exp((f[:, None] + g[None, :] - c) / eps)


def _violation(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(max(np.abs(plan.sum(axis=1) - a).max(), np.abs(plan.sum(axis=0) - b).max()))


def _schedule(c: np.ndarray, eps: float) -> List[float]:
    stages = [eps]
    current = float(c.max())
    while current > eps:
        stages.insert(-1, current)
        current *= SCALING_FACTOR
    return stages


def round_to_marginals(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Project a nonnegative matrix onto the transport polytope U(a, b).

    Rows are scaled down to at most a, then columns to at most b, and the missing mass is
    restored with the rank-one correction err_a err_b^T / |err_a|_1. The result is feasible
    and differs from plan by at most twice its marginal violation in l1.
    """
    rows = plan.sum(axis=1)
    x = np.minimum(np.divide(a, rows, out=np.ones_like(a), where=rows > 0), 1.0)
    out = plan * x[:, None]
    cols = out.sum(axis=0)
    y = np.minimum(np.divide(b, cols, out=np.ones_like(b), where=cols > 0), 1.0)
    out = out * y[None, :]
    err_a = np.maximum(a - out.sum(axis=1), 0.0)
    err_b = np.maximum(b - out.sum(axis=0), 0.0)
    missing = float(err_a.sum())
    if missing > 0.0:
        out = out + np.outer(err_a, err_b) / missing
    return out


def sinkhorn(
    cost: CostMatrix, settings: SinkhornSettings, epsilon: Optional[float] = None
) -> Tuple[TransportPlan, float, float]:
    """
    Entropic OT plan by log-domain Sinkhorn updates on the dual potentials (f, g).

    Epsilon is annealed from max(C) down to the target with warm-started potentials; the
    iteration cap counts updates over all stages. The last iterate is rounded onto the
    transport polytope, so the returned plan always has the requested marginals and its sharp
    cost is never below the exact OT value. `converged` reports whether the unrounded iterate
    met the tolerance.

    Args:
        cost: n x m costs with marginals
        settings: relative epsilon, iteration cap and marginal tolerance
        epsilon: absolute epsilon; replaces settings.epsilon * mean(C) when given

    Returns:
        (plan, sharp cost <M, C>, regularized value <M, C> + eps KL(M | a b^T))
    """
    c = cost.values
    scale = float(c.mean())
    eps = epsilon if epsilon is not None else settings.epsilon * (scale if scale > 0 else 1.0)
    if eps <= 0:
        raise OTInputError(f"epsilon must be > 0, got {eps}")
    log_a = np.log(cost.a)
    log_b = np.log(cost.b)

    f = np.zeros(c.shape[0])
    g = np.zeros(c.shape[1])
    violation = np.inf
    iterations = 0
    stages = _schedule(c, eps)
    for stage, stage_eps in enumerate(stages):
        final = stage == len(stages) - 1
        target = settings.tolerance if final else max(settings.tolerance, STAGE_TOLERANCE)
        used = 0
        while iterations < settings.max_iterations and (final or used < STAGE_ITERATIONS):
            iterations += 1
            used += 1
            f = stage_eps * (log_a - logsumexp((g[None, :] - c) / stage_eps, axis=1))
            g = stage_eps * (log_b - logsumexp((f[:, None] - c) / stage_eps, axis=0))
            violation = _violation(_plan(c, f, g, stage_eps), cost.a, cost.b)
            if violation < target:
                break
        if iterations >= settings.max_iterations:
            break

    raw = _plan(c, f, g, eps)
    raw_violation = _violation(raw, cost.a, cost.b)
    converged = raw_violation < settings.tolerance
    if not converged:
        logger.debug(
            f"Sinkhorn stopped after {iterations} iterations with marginal violation {raw_violation:.2e}"
        )

    plan = round_to_marginals(raw, cost.a, cost.b)
    sharp = float(np.sum(plan * c))
    positive = plan > 0
    ratio = plan[positive] / np.outer(cost.a, cost.b)[positive]
    regularized = sharp + eps * float(np.sum(plan[positive] * np.log(ratio)))
    result = TransportPlan(
        matrix=plan,
        marginal_violation=_violation(plan, cost.a, cost.b),
        iterations=iterations,
        converged=converged,
        epsilon=eps,
    )
    return result, sharp, regularized


def _canonical_first(fa: Tensor, fb: Tensor) -> bool:
    # Fixed orientation so that W(a, b) and W(b, a) run the identical computation
    key_a = (fa.shape, fa.data.tobytes())
    key_b = (fb.shape, fb.data.tobytes())
    return key_a <= key_b


def sinkhorn_distance(
    fa: Tensor | np.ndarray, fb: Tensor | np.ndarray, settings: SinkhornSettings
) -> Tuple[Tensor, TransportPlan]:
    # Sharp Sinkhorn cost <M, C(fa, fb)> as a tensor; gradient flows to C with M held fixed
    ta, tb = as_tensor(fa), as_tensor(fb)
    if not _canonical_first(ta, tb):
        ta, tb = tb, ta
    cost = cosine_cost_tensor(ta, tb)
    plan, _, _ = sinkhorn(CostMatrix.uniform(np.clip(cost.data, 0.0, 2.0)), settings)
    return weighted_sum(cost, plan.matrix), plan


def ot_gradient_wrt_features(
    fa: Tensor, fb: Tensor, settings: SinkhornSettings
) -> Dict[str, np.ndarray]:
    # dW/dfa and dW/dfb via M -> C -> cosine cost -> features
    wa = Tensor(fa.data, requires_grad=True)
    wb = Tensor(fb.data, requires_grad=True)
    distance, _ = sinkhorn_distance(wa, wb, settings)
    return grad(distance, {"fa": wa, "fb": wb})
