"""
src/ot/energy.py

Generalized squared energy distance between two feature distributions, estimated from one draw of
four batches: 2 W(Xa, Xb) - W(Xa, Xa') - W(Xb, Xb'), each W a sharp Sinkhorn cost.

Top-level declarations:
- EnergyTerms: The three distances behind one estimate, for logging
- energy_distance: Differentiable estimate from four batches
- halved_energy: Estimate from two batches split into independent halves
"""

from __future__ import annotations

from typing import NamedTuple

from src.tensor import Tensor
from src.tensor.ops import add, as_tensor, scale, sub, take_rows

from .sinkhorn import sinkhorn_distance
from .types import OTInputError, SinkhornSettings


class EnergyTerms(NamedTuple):
    cross: Tensor
    within_a: Tensor
    within_b: Tensor

    @property
    def value(self) -> Tensor:
        # within terms are summed first so (a, a') <-> (b, b') swaps are bit-identical
        return sub(scale(self.cross, 2.0), add(self.within_a, self.within_b))


def energy_terms(xa: Tensor, xa2: Tensor, xb: Tensor, xb2: Tensor, settings: SinkhornSettings) -> EnergyTerms:
    widths = {t.shape[1] for t in (xa, xa2, xb, xb2) if t.ndim == 2}
    if len(widths) != 1:
        raise OTInputError("energy distance needs four n x d batches sharing d")
    cross, _ = sinkhorn_distance(xa, xb, settings)
    within_a, _ = sinkhorn_distance(xa, xa2, settings)
    within_b, _ = sinkhorn_distance(xb, xb2, settings)
    return EnergyTerms(cross, within_a, within_b)


def energy_distance(
    xa: Tensor, xa2: Tensor, xb: Tensor, xb2: Tensor, settings: SinkhornSettings
) -> Tensor:
    return energy_terms(as_tensor(xa), as_tensor(xa2), as_tensor(xb), as_tensor(xb2), settings).value


def halved_energy(fa: Tensor, fb: Tensor, settings: SinkhornSettings) -> Tensor:
    """
    Energy distance between the distributions behind two feature batches.

    Each batch is split into halves (first, second); the estimate pairs a's first half with b's
    second half, and uses (a1, a2) and (b2, b1) as the within-distribution pairs. When fa and fb
    hold the same rows the result is exactly zero.

    Args:
        fa: n x d features, n even
        fb: n x d features
        settings: Sinkhorn settings shared by all three distances

    Returns:
        Scalar tensor
    """
    fa, fb = as_tensor(fa), as_tensor(fb)
    n = fa.shape[0]
    if n % 2 or n < 2 or fb.shape[0] != n:
        raise OTInputError(f"halved energy needs two batches of the same even size, got {fa.shape} and {fb.shape}")
    h = n // 2
    a1, a2 = take_rows(fa, 0, h), take_rows(fa, h, n)
    b1, b2 = take_rows(fb, 0, h), take_rows(fb, h, n)
    return energy_distance(a1, a2, b2, b1, settings)
