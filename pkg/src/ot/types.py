"""
src/ot/types.py

Pydantic models for optimal-transport inputs and results.

Top-level declarations:
- OTInputError: Raised on dimension mismatches or oracle misuse
- SinkhornSettings: Relative entropic regularization, iteration cap, marginal tolerance
- CostMatrix: Pairwise costs with uniform marginals attached
- TransportPlan: Soft-matching matrix with convergence diagnostics
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.config import OTConfig


class OTInputError(ValueError):
    # Raised on feature dimension mismatches or inputs outside an oracle's domain
    pass


class SinkhornSettings(BaseModel):
    # epsilon is relative to mean(C); iterations always run in the log domain
    epsilon: float = 0.1
    max_iterations: int = 200
    tolerance: float = 1e-6
    log_domain: bool = True

    @field_validator("epsilon", "tolerance")
    @classmethod
    def check_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("epsilon and tolerance must be > 0")
        return v

    @field_validator("log_domain")
    @classmethod
    def check_log_domain(cls, v: bool) -> bool:
        if not v:
            raise ValueError("only log-domain iterations are supported")
        return v

    @classmethod
    def from_config(cls, cfg: OTConfig) -> "SinkhornSettings":
        return cls(epsilon=cfg.epsilon, max_iterations=cfg.max_iterations, tolerance=cfg.tolerance)


class CostMatrix(BaseModel):
    # n x m costs with uniform marginals a = 1/n, b = 1/m
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def uniform(cls, values: np.ndarray) -> "CostMatrix":
        c = np.asarray(values, dtype=np.float64)
        if c.ndim != 2 or min(c.shape) < 1:
            raise OTInputError(f"cost matrix must be a non-empty 2-D array, got shape {c.shape}")
        n, m = c.shape
        return cls(values=c, a=np.full(n, 1.0 / n), b=np.full(m, 1.0 / m))

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))


class TransportPlan(BaseModel):
    # Nonnegative coupling with achieved marginal violation and iteration diagnostics
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    marginal_violation: float
    iterations: int
    converged: bool
    epsilon: float

    @property
    def mass(self) -> float:
        return float(self.matrix.sum())
