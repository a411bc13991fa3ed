"""
src/tensor/__init__.py

Package initialization for the tensor core: immutable tensors, reverse-mode autodiff, layers and
finite-difference gradient checking.

No top-level functions or classes.
"""

from .gradcheck import grad_check
from .tensor import (
    Graph,
    Tensor,
    backward,
    constant,
    execute,
    get_dtype,
    grad,
    parameter,
    set_precision,
)
from .types import GradReport, GraphError, NonFiniteError, ShapeError

__all__ = [
    "Graph",
    "GradReport",
    "GraphError",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "backward",
    "constant",
    "execute",
    "get_dtype",
    "grad",
    "grad_check",
    "parameter",
    "set_precision",
]
