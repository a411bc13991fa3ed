"""
src/tensor/types.py

Exceptions and report models for the tensor core.

Top-level declarations:
- ShapeError: Raised on incompatible shapes, geometry or non-scalar losses
- NonFiniteError: Raised when an op produces NaN/Inf, naming the offending node
- GraphError: Raised on misuse of a Graph (backward before execute, bad references)
- NodeRecord: One recorded op on a Graph tape
- GradReport: Result of a finite-difference gradient check
"""

from typing import Any, Dict, List

from pydantic import BaseModel, Field


class ShapeError(ValueError):
    # Raised on incompatible shapes, invalid convolution geometry or non-scalar losses
    pass


class NonFiniteError(ArithmeticError):
    # Raised when an op produces NaN/Inf; NaN/Inf is an error state, never a value
    def __init__(self, node_id: int, op: str):
        self.node_id = node_id
        self.op = op
        super().__init__(f"Non-finite value produced by node {node_id} ({op})")


class GraphError(RuntimeError):
    # Raised on Graph misuse: backward before execute, missing loss, dangling node ids
    pass


class NodeRecord(BaseModel):
    # One recorded op: kind, input node ids and static attributes (stride, padding, ...)
    node_id: int
    op: str
    inputs: List[int] = Field(default_factory=list)
    attrs: Dict[str, Any] = Field(default_factory=dict)


class GradReport(BaseModel):
    # Per-tensor max relative error between analytic and central-difference gradients
    errors: Dict[str, float] = Field(default_factory=dict)
    step: float = 1e-5
    tolerance: float = 1e-4
    probes: int = 0
    passed: bool = True

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)
