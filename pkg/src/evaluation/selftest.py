"""
src/evaluation/selftest.py

Invariant suites behind the `gradcheck` and `selftest` subcommands. Every check builds its own
tiny inputs from a seed, so the suites need no data on disk and run in well under a minute.

Top-level declarations:
- GRADIENT_CASES: Names of the autodiff cases in gradient_suite
- gradient_suite: Finite-difference reports for every op family and the composed generator losses
- danskin_check: Envelope-rule gradient of the regularized OT value w.r.t. both feature batches
- sinkhorn_oracle_check: Sharp Sinkhorn cost against brute-force OT on random small matrices
- run_selftest: All suites; returns (passed, summary lines)
"""

from __future__ import annotations

import logging
import tempfile
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

from src.data import generate_glyph_dataset, parse_idx, parse_idx_labels, write_idx
from src.nets import (
    ClassifierSpec,
    CriticSpec,
    DomainCode,
    GeneratorSpec,
    critic_embed,
    generator_forward,
    init_weights,
)
from src.ot import (
    CostMatrix,
    SinkhornSettings,
    cosine_cost_matrix,
    energy_distance,
    exact_ot_bruteforce,
    ot_gradient_wrt_features,
    sinkhorn,
    sinkhorn_distance,
)
from src.tensor import GradReport, Graph, Tensor, get_dtype, grad_check, parameter, set_precision
from src.tensor.layers import (
    conv2d,
    conv_transpose2d,
    instance_norm,
    l1_loss,
    linear,
    max_pool2x2,
    softmax_cross_entropy,
)
from src.tensor.ops import (
    abs_,
    add,
    broadcast_to,
    clamp_min,
    concat,
    div,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    sqrt,
    sub,
    sum_,
    take_rows,
    tanh,
    transpose,
    weighted_sum,
)
from src.train.losses import loss_ce_generated, loss_cycle

logger = logging.getLogger(__name__)

CaseBuilder = Callable[[np.random.Generator], Tuple[Graph, Dict[str, Tensor]]]


def _input(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _conv_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    params = {"w": parameter(rng.normal(size=(3, 2, 3, 3)) * 0.5), "b": parameter(rng.normal(size=3))}
    graph = Graph(
        lambda x, p: {"loss": sum_(tanh(conv2d(x["x"], p["w"], p["b"], stride=2, padding=1)))}, params
    )
    return graph, {"x": _input(rng, 2, 2, 6, 6)}


def _conv_transpose_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    params = {"w": parameter(rng.normal(size=(3, 2, 3, 3)) * 0.5), "b": parameter(rng.normal(size=2))}

    def build(x: Dict[str, Tensor], p: Dict[str, Tensor]) -> Dict[str, Tensor]:
        y = conv_transpose2d(x["x"], p["w"], p["b"], stride=2, padding=1, output_padding=1)
        return {"loss": sum_(tanh(y))}

    return Graph(build, params), {"x": _input(rng, 2, 3, 3, 3)}


def _pool_norm_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    params = {"gain": parameter(rng.uniform(0.5, 1.5, size=2)), "bias": parameter(rng.normal(size=2))}

    def build(x: Dict[str, Tensor], p: Dict[str, Tensor]) -> Dict[str, Tensor]:
        h = instance_norm(max_pool2x2(x["x"]), p["gain"], p["bias"])
        return {"loss": sum_(tanh(h))}

    return Graph(build, params), {"x": _input(rng, 2, 2, 4, 4)}


def _dense_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    params = {"w": parameter(rng.normal(size=(4, 5))), "b": parameter(rng.normal(size=4))}
    labels = rng.integers(0, 4, size=3)

    def build(x: Dict[str, Tensor], p: Dict[str, Tensor]) -> Dict[str, Tensor]:
        logits = linear(relu(x["x"]), p["w"], p["b"])
        return {"loss": add(softmax_cross_entropy(logits, labels), mean(tanh(logits)))}

    return Graph(build, params), {"x": _input(rng, 3, 5)}


def _elementwise_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    params = {"a": parameter(rng.normal(size=(3, 4)))}
    weights = rng.normal(size=(4, 4))
    ones = Tensor(np.ones((4, 4)))

    def build(x: Dict[str, Tensor], p: Dict[str, Tensor]) -> Dict[str, Tensor]:
        h = take_rows(concat([p["a"], x["b"]], axis=0), 1, 5)
        m = matmul(h, transpose(h))
        s = sqrt(add(mul(h, h), ones))
        q = div(s, clamp_min(abs_(reshape(m, (4, 4))), 0.5))
        r = sub(q, broadcast_to(mean(h, axis=0, keepdims=True), (4, 4)))
        return {"loss": add(weighted_sum(r, weights), scale(l1_loss(h, x["c"]), 0.5))}

    return Graph(build, params), {"b": _input(rng, 3, 4), "c": _input(rng, 4, 4)}


def _tiny_generator(rng: np.random.Generator) -> Dict[str, Tensor]:
    # He init with a zeroed output conv is a corner case; jitter every array to a generic point
    weights = init_weights(GeneratorSpec(image_channels=3, num_domains=3, widths=[2, 3, 4]), 0)
    return {
        name: parameter(value + 0.1 * rng.normal(size=value.shape), name=name)
        for name, value in weights.arrays.items()
    }


def _cycle_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    source, novel = DomainCode(index=0, length=3), DomainCode(index=2, length=3)
    graph = Graph(lambda x, p: {"loss": loss_cycle(x["x"], p, source, novel)}, _tiny_generator(rng))
    return graph, {"x": Tensor(rng.uniform(-1, 1, size=(2, 3, 8, 8)))}


def _ce_frozen_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    # Y-hat is frozen: only the generator parameters are probed
    yhat = init_weights(ClassifierSpec(image_channels=3, image_size=16, width=3, num_classes=4), 1)
    frozen = yhat.tensors(trainable=False)
    novel = DomainCode(index=1, length=3)
    labels = np.array([0, 3])

    def build(x: Dict[str, Tensor], p: Dict[str, Tensor]) -> Dict[str, Tensor]:
        return {"loss": loss_ce_generated(generator_forward(p, x["x"], novel), labels, frozen)}

    return Graph(build, _tiny_generator(rng)), {"x": Tensor(rng.uniform(-1, 1, size=(2, 3, 16, 16)))}


def _critic_input_case(rng: np.random.Generator) -> Tuple[Graph, Dict[str, Tensor]]:
    critic = init_weights(CriticSpec(image_channels=3, widths=[3, 4, 5], embedding_dim=6, num_domains=2), 2)
    frozen = critic.tensors(trainable=False)
    graph = Graph(lambda x, p: {"loss": sum_(tanh(critic_embed(frozen, x["x"])))})
    return graph, {"x": Tensor(rng.uniform(-1, 1, size=(2, 3, 8, 8)), requires_grad=True)}


GRADIENT_CASES: Dict[str, CaseBuilder] = {
    "conv2d": _conv_case,
    "conv_transpose2d": _conv_transpose_case,
    "max_pool_instance_norm": _pool_norm_case,
    "linear_cross_entropy": _dense_case,
    "elementwise": _elementwise_case,
    "cycle_loss": _cycle_case,
    "ce_through_frozen_classifier": _ce_frozen_case,
    "critic_input": _critic_input_case,
}


class _Float64:
    # Context manager that switches tensor precision to float64 and back

    def __enter__(self) -> None:
        self.previous = np.dtype(get_dtype()).name
        set_precision("float64")

    def __exit__(self, *exc: object) -> None:
        set_precision(self.previous)


def danskin_check(
    seed: int = 0, n: int = 4, m: int = 5, dim: int = 6, tolerance: float = 1e-4, probes: int = 12
) -> GradReport:
    """
    Compare ot_gradient_wrt_features with central differences of the regularized OT value.

    The entropic scale is held at the absolute epsilon of the unperturbed solve, so the
    finite-difference target is a fixed function of the features.
    """
    rng = np.random.default_rng(seed)
    settings = SinkhornSettings(epsilon=0.1, max_iterations=20000, tolerance=1e-12)
    with _Float64():
        fa, fb = rng.normal(size=(n, dim)), rng.normal(size=(m, dim))
        analytic = ot_gradient_wrt_features(Tensor(fa), Tensor(fb), settings)
        _, plan = sinkhorn_distance(fa, fb, settings)
        eps = plan.epsilon

        def value(xa: np.ndarray, xb: np.ndarray) -> float:
            return sinkhorn(cosine_cost_matrix(xa, xb), settings, epsilon=eps)[2]

        report = GradReport(tolerance=tolerance)
        for name, base in (("fa", fa), ("fb", fb)):
            flat = base.reshape(-1)
            picks = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
            worst = 0.0
            for index in picks:
                h = report.step * (1.0 + abs(flat[index]))
                values = []
                for delta in (h, -h):
                    bumped = flat.copy()
                    bumped[index] += delta
                    bumped = bumped.reshape(base.shape)
                    values.append(value(bumped, fb) if name == "fa" else value(fa, bumped))
                numeric = (values[0] - values[1]) / (2.0 * h)
                g_a = float(analytic[name].reshape(-1)[index])
                worst = max(worst, abs(g_a - numeric) / max(1.0, abs(g_a), abs(numeric)))
            report.errors[name] = worst
            report.probes += len(picks)
    report.passed = report.max_error <= tolerance
    return report


def gradient_suite(seed: int = 0, tolerance: float = 1e-4) -> Dict[str, GradReport]:
    reports: Dict[str, GradReport] = {}
    with _Float64():
        for name, builder in GRADIENT_CASES.items():
            graph, inputs = builder(np.random.default_rng([seed, len(reports)]))
            reports[name] = grad_check(graph, inputs, tolerance=tolerance, seed=seed)
    reports["ot_envelope"] = danskin_check(seed=seed, tolerance=tolerance)
    return reports


def sinkhorn_oracle_check(seed: int = 0, trials: int = 50) -> Tuple[bool, str]:
    # Sharp cost at eps = 0.01 mean(C): within 2% of the exact optimum, never below it
    rng = np.random.default_rng(seed)
    settings = SinkhornSettings(epsilon=0.01, max_iterations=20000, tolerance=1e-9)
    worst_gap, worst_violation, below = 0.0, 0.0, 0
    for trial in range(trials):
        n = 2 + trial % 4
        cost = CostMatrix.uniform(rng.uniform(0.0, 1.0, size=(n, n)))
        plan, sharp, _ = sinkhorn(cost, settings)
        exact = exact_ot_bruteforce(cost)
        worst_gap = max(worst_gap, (sharp - exact) / max(exact, 1e-12))
        worst_violation = max(worst_violation, plan.marginal_violation)
        below += int(sharp < exact - 1e-9)
    passed = worst_gap <= 0.02 and below == 0 and worst_violation < 1e-6
    return passed, f"relative gap {worst_gap:.2e}, violation {worst_violation:.1e}, below optimum {below}"


def _monotone_epsilon_check(seed: int) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    settings = SinkhornSettings(max_iterations=20000, tolerance=1e-11)
    cost = CostMatrix.uniform(rng.uniform(0.0, 1.0, size=(5, 5)))
    scale_c = float(cost.values.mean())
    sharps = [sinkhorn(cost, settings, epsilon=f * scale_c)[1] for f in (1.0, 0.3, 0.1, 0.03, 0.01)]
    passed = all(b <= a + 1e-9 for a, b in zip(sharps, sharps[1:]))
    return passed, "sharp costs " + ", ".join(f"{s:.5f}" for s in sharps)


def _energy_check(seed: int) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    settings = SinkhornSettings()
    x = rng.normal(size=(6, 4))
    a, a2, b, b2 = (rng.normal(size=(6, 4)) + shift for shift in (0.0, 0.0, 2.0, 2.0))
    self_distance = energy_distance(x, x, x, x, settings).item()
    forward = energy_distance(a, a2, b, b2, settings).item()
    swapped = energy_distance(b, b2, a, a2, settings).item()
    passed = self_distance == 0.0 and abs(forward - swapped) <= 1e-12
    return passed, f"self {self_distance!r}, swap difference {abs(forward - swapped):.1e}"


def _idx_check(seed: int) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(5, 7, 6), dtype=np.uint8)
    labels = rng.integers(0, 10, size=5).astype(np.uint8)
    with tempfile.TemporaryDirectory() as tmp:
        write_idx(Path(tmp) / "images.idx", images)
        write_idx(Path(tmp) / "labels.idx", labels)
        decoded = parse_idx(Path(tmp) / "images.idx").data
        decoded_labels = parse_idx_labels(Path(tmp) / "labels.idx")
    restored = np.rint((decoded[:, 0] + 1.0) * 127.5).astype(np.uint8)
    passed = np.array_equal(restored, images) and np.array_equal(decoded_labels, labels)
    return passed, f"{images.shape[0]} images of {images.shape[1]}x{images.shape[2]}"


def _glyph_check(seed: int) -> Tuple[bool, str]:
    first = generate_glyph_dataset(20, 7 + seed, image_size=16)
    second = generate_glyph_dataset(20, 7 + seed, image_size=16)
    return first.digest() == second.digest(), f"digest {first.digest()[:12]}"


def run_selftest(seed: int = 0) -> Tuple[bool, List[str]]:
    lines: List[str] = []
    passed = True

    def record(name: str, ok: bool, detail: str) -> None:
        nonlocal passed
        passed = passed and ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    for name, report in gradient_suite(seed).items():
        record(f"gradient/{name}", report.passed, f"max error {report.max_error:.2e} over {report.probes} probes")
    with _Float64():
        record("sinkhorn/oracle", *sinkhorn_oracle_check(seed))
        record("sinkhorn/epsilon_monotone", *_monotone_epsilon_check(seed))
        record("energy/self_and_swap", *_energy_check(seed))
    record("data/idx_round_trip", *_idx_check(seed))
    record("data/glyph_determinism", *_glyph_check(seed))

    for line in lines:
        logger.debug(line)
    logger.info(f"Selftest {'passed' if passed else 'FAILED'}: {sum(l.startswith('PASS') for l in lines)}/{len(lines)} checks")
    return passed, lines
