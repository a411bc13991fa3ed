"""
src/ot/exact.py

Brute-force optimal transport for small square problems with uniform marginals. With a = b = 1/n
some permutation matrix is optimal, so enumerating the n! assignments gives the exact value.

Top-level declarations:
- MAX_BRUTEFORCE_SIZE: Largest n accepted by the enumeration
- exact_ot_bruteforce: min over permutations of (1/n) * sum_i C[i, sigma(i)]
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .types import CostMatrix, OTInputError

MAX_BRUTEFORCE_SIZE = 6


def exact_ot_bruteforce(cost: CostMatrix) -> float:
    n, m = cost.shape
    if n != m:
        raise OTInputError(f"brute-force OT needs a square cost matrix, got {n}x{m}")
    if n > MAX_BRUTEFORCE_SIZE:
        raise OTInputError(f"brute-force OT is limited to n <= {MAX_BRUTEFORCE_SIZE}, got {n}")
    if not (np.allclose(cost.a, 1.0 / n) and np.allclose(cost.b, 1.0 / m)):
        raise OTInputError("brute-force OT requires uniform marginals")

    rows = np.arange(n)
    best = min(float(cost.values[rows, list(sigma)].sum()) for sigma in permutations(range(n)))
    return best / n
