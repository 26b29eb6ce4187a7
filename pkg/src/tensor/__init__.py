"""Dense float64 tensor primitives with reverse-mode differentiation."""
from .graph import Graph, Node, Var, backward
from .init import glorot_uniform
from .ops import OP_REGISTRY, Tensor, conv_output_extent, forward, get_op
from .optim import AdamState, adam_step
from .params import ParameterSet, count_parameters

__all__ = [
    "Graph",
    "Node",
    "Var",
    "backward",
    "forward",
    "get_op",
    "OP_REGISTRY",
    "Tensor",
    "conv_output_extent",
    "glorot_uniform",
    "AdamState",
    "adam_step",
    "ParameterSet",
    "count_parameters",
]
