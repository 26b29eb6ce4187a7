"""Append-only computation graph with reverse-mode differentiation.

A ``Graph`` records every primitive applied through it. Node ids grow
monotonically, so inputs always precede their consumers and a single sweep in
descending id order is a valid reverse topological order.

Graphs are single-writer: build and differentiate one graph from one thread.
Node values are frozen (read-only arrays) and can be shared freely.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..utils.error_handler import ShapeError
from .ops import Tensor, get_op

LEAF = "leaf"


@dataclass
class Node:
    """One recorded operation (or a leaf)."""
    id: int
    op_kind: str
    inputs: Tuple[int, ...]
    value: Tensor
    attrs: Dict[str, Any] = field(default_factory=dict)
    ctx: Dict[str, Any] = field(default_factory=dict)
    name: Optional[str] = None
    requires_grad: bool = False


@dataclass(frozen=True)
class Var:
    """Handle to a node of a specific graph."""
    graph: "Graph"
    id: int

    @property
    def value(self) -> Tensor:
        return self.graph.nodes[self.id].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape


def _frozen(value) -> Tensor:
    array = np.array(value, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


class Graph:
    """Records primitives and differentiates scalar losses."""

    def __init__(self):
        self.nodes: List[Node] = []
        self._params: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, node.id)

    def param(self, name: str, value) -> Var:
        """Register a trainable leaf; gradients are reported under ``name``."""
        if name in self._params:
            raise ValueError(f"parameter {name!r} registered twice")
        var = self._append(Node(len(self.nodes), LEAF, (), _frozen(value), name=name, requires_grad=True))
        self._params[name] = var.id
        return var

    def params(self, values: Mapping[str, Tensor]) -> Dict[str, Var]:
        return {name: self.param(name, value) for name, value in values.items()}

    def constant(self, value, name: Optional[str] = None) -> Var:
        return self._append(Node(len(self.nodes), LEAF, (), _frozen(value), name=name))

    def apply(self, op_kind: str, *inputs: Var, **attrs: Any) -> Var:
        """Evaluate ``op_kind`` on ``inputs`` and record the result."""
        op = get_op(op_kind)
        for var in inputs:
            if var.graph is not self:
                raise ValueError(f"{op_kind}: input belongs to another graph")
        ctx: Dict[str, Any] = {}
        value = op.forward(ctx, *(self.nodes[v.id].value for v in inputs), **attrs)
        value = np.asarray(value, dtype=np.float64)
        value.setflags(write=False)
        requires_grad = any(self.nodes[v.id].requires_grad for v in inputs)
        node = Node(
            len(self.nodes), op_kind, tuple(v.id for v in inputs), value,
            attrs=dict(attrs), ctx=ctx if requires_grad else {}, requires_grad=requires_grad,
        )
        return self._append(node)

    def backward(self, loss: Var) -> Dict[str, Tensor]:
        """Gradient of a scalar ``loss`` with respect to every registered parameter.

        Parameters the loss does not depend on receive zero gradients.
        """
        loss_value = self.nodes[loss.id].value
        if loss_value.size != 1 or any(extent != 1 for extent in loss_value.shape):
            raise ShapeError("backward", loss_value.shape, detail="loss must be a scalar")

        grads: Dict[int, Tensor] = {loss.id: np.ones_like(loss_value)}
        for node_id in range(loss.id, -1, -1):
            grad = grads.get(node_id)
            node = self.nodes[node_id]
            if grad is None or node.op_kind == LEAF or not node.requires_grad:
                continue
            del grads[node_id]
            op = get_op(node.op_kind)
            input_values = [self.nodes[i].value for i in node.inputs]
            input_grads = op.backward(node.ctx, grad, *input_values, **node.attrs)
            for input_id, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not self.nodes[input_id].requires_grad:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = np.asarray(input_grad, dtype=np.float64)

        result: Dict[str, Tensor] = {}
        for name, node_id in self._params.items():
            value = self.nodes[node_id].value
            result[name] = grads.get(node_id, np.zeros_like(value)).reshape(value.shape)
        return result


def backward(graph: Graph, loss: Var) -> Dict[str, Tensor]:
    """Module-level form of ``Graph.backward``."""
    return graph.backward(loss)
