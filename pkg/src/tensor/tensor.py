"""
src/tensor/tensor.py

Immutable dense tensors with reverse-mode automatic differentiation, and the Graph wrapper that
records an op tape for named-input programs.

Every op builds its output through `make_result`, which checks finiteness, records the node on
the active Graph tape and stores a vector-Jacobian closure. Gradients are returned as plain numpy
arrays keyed by tensor; tensors themselves never change after creation.

Top-level declarations:
- set_precision / get_dtype: Select float64 (default) or float32 storage
- Tensor: Immutable array node with requires_grad flag and backward closure
- parameter / constant: Convenience constructors
- make_result: Build an op output node (finiteness check, tape record, vjp)
- grad: Reverse-mode sweep from a scalar loss to a set of tensors
- Graph: Builder function plus the op tape of its last execution
- execute: Run a Graph on named inputs
- backward: Gradients of a Graph's scalar output w.r.t. its parameters (and inputs)
"""

from __future__ import annotations

import itertools
import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .types import GraphError, NodeRecord, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_DTYPES = {"float64": np.float64, "float32": np.float32}
_dtype: type = np.float64
_ids = itertools.count()

# Graph whose tape records op nodes during execute(); None outside execute
_active_graph: Optional["Graph"] = None

VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def set_precision(name: str) -> None:
    # Select storage precision for newly created tensors
    global _dtype
    if name not in _DTYPES:
        raise ValueError(f"Unsupported precision: {name}")
    _dtype = _DTYPES[name]
    logger.debug(f"Tensor precision set to {name}")


def get_dtype() -> type:
    return _dtype


class Tensor:
    # Immutable array node; ops create new tensors, parameter updates create replacements

    __slots__ = ("data", "requires_grad", "name", "op", "parents", "vjp", "node_id")

    def __init__(
        self,
        data: object,
        requires_grad: bool = False,
        name: Optional[str] = None,
        *,
        op: str = "leaf",
        parents: Tuple["Tensor", ...] = (),
        vjp: Optional[VJP] = None,
        _owned: bool = False,
    ) -> None:
        arr = data if _owned else np.array(data, dtype=_dtype, copy=True)
        if not isinstance(arr, np.ndarray):
            raise TypeError("Tensor data must be array-like")
        arr.setflags(write=False)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.name = name
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.node_id = next(_ids)
        if op == "leaf" and not np.isfinite(arr).all():
            raise NonFiniteError(self.node_id, "leaf")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        # Same values, no history
        return Tensor(self.data, _owned=True)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label}, requires_grad={self.requires_grad})"

    # Operator sugar delegates to src.tensor.ops (imported lazily to avoid a cycle)
    def __add__(self, other: object) -> "Tensor":
        from . import ops

        return ops.add(self, ops.as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other: object) -> "Tensor":
        from . import ops

        return ops.sub(self, ops.as_tensor(other))

    def __rsub__(self, other: object) -> "Tensor":
        from . import ops

        return ops.sub(ops.as_tensor(other), self)

    def __mul__(self, other: object) -> "Tensor":
        from . import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, ops.as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from . import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.matmul(self, other)


def parameter(data: object, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def constant(data: object, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def make_result(
    data: np.ndarray,
    op: str,
    parents: Tuple[Tensor, ...],
    vjp: VJP,
    attrs: Optional[Dict[str, object]] = None,
) -> Tensor:
    # Wrap an op output: finiteness check, history only when a parent needs gradients
    out_data = np.ascontiguousarray(data, dtype=_dtype)
    needs_grad = any(p.requires_grad for p in parents)
    out = Tensor(
        out_data,
        requires_grad=needs_grad,
        op=op,
        parents=parents if needs_grad else (),
        vjp=vjp if needs_grad else None,
        _owned=True,
    )
    if _active_graph is not None:
        _active_graph.nodes.append(
            NodeRecord(
                node_id=out.node_id,
                op=op,
                inputs=[p.node_id for p in parents],
                attrs=dict(attrs or {}),
            )
        )
    if not np.isfinite(out_data).all():
        raise NonFiniteError(out.node_id, op)
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    # Iterative post-order DFS over nodes that carry history
    order: List[Tensor] = []
    visited: set[int] = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    return order


def grad(loss: Tensor, wrt: Mapping[str, Tensor]) -> Dict[str, np.ndarray]:
    # Reverse-mode sweep; unreached or frozen tensors get exact zero gradients
    if loss.data.size != 1:
        raise ShapeError(f"Loss must be scalar, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(_topological_order(loss)):
            upstream = grads.get(id(node))
            if upstream is None or node.vjp is None:
                continue
            parent_grads = node.vjp(upstream)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = np.asarray(pg, dtype=parent.data.dtype)

    result: Dict[str, np.ndarray] = {}
    for name, tensor in wrt.items():
        g = grads.get(id(tensor)) if tensor.requires_grad else None
        result[name] = np.zeros_like(tensor.data) if g is None else np.asarray(g).reshape(tensor.shape)
    return result


Builder = Callable[[Dict[str, Tensor], Dict[str, Tensor]], Dict[str, Tensor]]


class Graph:
    # Define-by-run program: builder(inputs, parameters) -> named outputs, plus its op tape

    def __init__(
        self,
        build: Optional[Builder] = None,
        parameters: Optional[Dict[str, Tensor]] = None,
        input_shapes: Optional[Dict[str, Tuple[int, ...]]] = None,
    ) -> None:
        self.build: Builder = build or (lambda inputs, params: dict(inputs))
        self.parameters: Dict[str, Tensor] = dict(parameters or {})
        self.input_shapes = input_shapes
        self.nodes: List[NodeRecord] = []
        self.inputs: Dict[str, Tensor] = {}
        self.outputs: Optional[Dict[str, Tensor]] = None

    def validate(self) -> None:
        # Recorded nodes appear once and only consume nodes recorded before them.
        # Leaves created inside the builder (constants, parameters) are never recorded.
        recorded = [record.node_id for record in self.nodes]
        if len(set(recorded)) != len(recorded):
            raise GraphError("Graph tape records a node twice")
        position = {node_id: i for i, node_id in enumerate(recorded)}
        for i, record in enumerate(self.nodes):
            for ref in record.inputs:
                if ref in position and position[ref] >= i:
                    raise GraphError(f"Node {record.node_id} consumes later node {ref}")


def execute(graph: Graph, inputs: Mapping[str, Tensor | np.ndarray]) -> Dict[str, Tensor]:
    # Run the builder on named inputs, recording every op on the graph's tape
    global _active_graph
    if graph.input_shapes is not None:
        if set(inputs) != set(graph.input_shapes):
            raise ShapeError(
                f"Input names {sorted(inputs)} do not match graph inputs {sorted(graph.input_shapes)}"
            )
        for name, expected in graph.input_shapes.items():
            actual = tuple(np.shape(inputs[name].data if isinstance(inputs[name], Tensor) else inputs[name]))
            if actual != tuple(expected):
                raise ShapeError(f"Input '{name}' has shape {actual}, expected {tuple(expected)}")

    named = {
        name: value if isinstance(value, Tensor) else Tensor(value, name=name)
        for name, value in inputs.items()
    }
    graph.nodes = [NodeRecord(node_id=t.node_id, op="input", attrs={"name": n}) for n, t in named.items()]
    graph.inputs = named

    previous = _active_graph
    _active_graph = graph
    try:
        outputs = graph.build(named, graph.parameters)
    finally:
        _active_graph = previous

    graph.outputs = dict(outputs)
    return graph.outputs


def backward(graph: Graph, loss: str = "loss", include_inputs: bool = False) -> Dict[str, np.ndarray]:
    # Gradients of the scalar output `loss` for every parameter (and optionally every input)
    if graph.outputs is None:
        raise GraphError("backward() called before execute()")
    if loss not in graph.outputs:
        raise GraphError(f"Graph has no output named '{loss}'")
    wrt: Dict[str, Tensor] = dict(graph.parameters)
    if include_inputs:
        wrt.update({f"input:{name}": t for name, t in graph.inputs.items()})
    return grad(graph.outputs[loss], wrt)
