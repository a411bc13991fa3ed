"""
src/tensor/gradcheck.py

Finite-difference verification of analytic gradients for any Graph.

Central differences use the step h = 1e-5 * (1 + |x|) per probed entry; the relative error is
|g_a - g_n| / max(1, |g_a|, |g_n|). Failures are reported in the GradReport, never raised.

Top-level declarations:
- grad_check: Compare backward() against central differences on random probes
"""

from __future__ import annotations

import logging
from typing import Dict, Mapping

import numpy as np

from .tensor import Graph, Tensor, backward, execute, get_dtype
from .types import GradReport, GraphError

logger = logging.getLogger(__name__)

BASE_STEP = 1e-5


def _loss_value(graph: Graph, inputs: Mapping[str, Tensor], loss: str) -> float:
    return float(execute(graph, inputs)[loss].data.reshape(-1)[0])


def grad_check(
    graph: Graph,
    inputs: Mapping[str, Tensor],
    tolerance: float = 1e-4,
    probes: int = 20,
    seed: int = 0,
    loss: str = "loss",
) -> GradReport:
    # Probes every parameter and every input that requires grad
    if get_dtype() is not np.float64:
        raise GraphError("grad_check requires float64 precision")

    rng = np.random.default_rng(seed)
    execute(graph, inputs)
    analytic = backward(graph, loss, include_inputs=True)

    targets: Dict[str, Tensor] = {
        name: t for name, t in graph.parameters.items() if t.requires_grad
    }
    targets.update({f"input:{n}": t for n, t in inputs.items() if t.requires_grad})

    report = GradReport(step=BASE_STEP, tolerance=tolerance)
    for name, tensor in targets.items():
        flat = tensor.data.reshape(-1)
        count = flat.size
        picks = np.arange(count) if count <= probes else rng.choice(count, size=probes, replace=False)
        worst = 0.0
        for index in picks:
            x0 = float(flat[index])
            h = BASE_STEP * (1.0 + abs(x0))
            values = []
            for delta in (h, -h):
                bumped = flat.copy()
                bumped[index] = x0 + delta
                replacement = Tensor(bumped.reshape(tensor.shape), requires_grad=True, name=tensor.name)
                if name.startswith("input:"):
                    trial_inputs = dict(inputs)
                    trial_inputs[name[len("input:") :]] = replacement
                    values.append(_loss_value(graph, trial_inputs, loss))
                else:
                    graph.parameters[name] = replacement
                    try:
                        values.append(_loss_value(graph, inputs, loss))
                    finally:
                        graph.parameters[name] = tensor
            numeric = (values[0] - values[1]) / (2.0 * h)
            g_a = float(analytic[name].reshape(-1)[index])
            error = abs(g_a - numeric) / max(1.0, abs(g_a), abs(numeric))
            worst = max(worst, error)
        report.errors[name] = worst
        report.probes += len(picks)

    report.passed = report.max_error <= tolerance
    if not report.passed:
        failing = {k: v for k, v in report.errors.items() if v > tolerance}
        logger.warning(f"Gradient check failed for {sorted(failing)} (max error {report.max_error:.3e})")
    else:
        logger.debug(f"Gradient check passed, max error {report.max_error:.3e}")

    # leave the graph in the state of the unperturbed run
    execute(graph, inputs)
    return report
