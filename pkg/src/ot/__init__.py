"""
src/ot/__init__.py

Package initialization for optimal-transport utilities: cosine cost, Sinkhorn plans and distances,
energy distance, and the brute-force oracle.

No top-level functions or classes.
"""

from .cost import NORM_FLOOR, cosine_cost_matrix, cosine_cost_tensor
from .energy import EnergyTerms, energy_distance, energy_terms, halved_energy
from .exact import MAX_BRUTEFORCE_SIZE, exact_ot_bruteforce
from .sinkhorn import ot_gradient_wrt_features, round_to_marginals, sinkhorn, sinkhorn_distance
from .types import CostMatrix, OTInputError, SinkhornSettings, TransportPlan

__all__ = [
    "MAX_BRUTEFORCE_SIZE",
    "NORM_FLOOR",
    "CostMatrix",
    "EnergyTerms",
    "OTInputError",
    "SinkhornSettings",
    "TransportPlan",
    "cosine_cost_matrix",
    "cosine_cost_tensor",
    "energy_distance",
    "energy_terms",
    "exact_ot_bruteforce",
    "halved_energy",
    "ot_gradient_wrt_features",
    "round_to_marginals",
    "sinkhorn",
    "sinkhorn_distance",
]
