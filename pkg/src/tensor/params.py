"""Ordered collection of named parameter arrays.

Declaration order is significant: it is the order parameters are flattened
into checkpoints and read back from them.
"""
from typing import Dict, Mapping, Tuple

import numpy as np

from ..utils.error_handler import ShapeError
from .ops import Tensor

ShapeMap = Mapping[str, Tuple[int, ...]]


class ParameterSet(Dict[str, Tensor]):
    """``dict`` of name → float64 array with flatten/unflatten helpers."""

    @classmethod
    def zeros(cls, shapes: ShapeMap) -> "ParameterSet":
        return cls((name, np.zeros(shape)) for name, shape in shapes.items())

    @classmethod
    def from_flat(cls, shapes: ShapeMap, vector: Tensor) -> "ParameterSet":
        vector = np.asarray(vector, dtype=np.float64).ravel()
        total = count_parameters(shapes)
        if vector.size != total:
            raise ShapeError("ParameterSet.from_flat", (vector.size,), (total,))
        out = cls()
        offset = 0
        for name, shape in shapes.items():
            size = int(np.prod(shape, dtype=np.int64))
            out[name] = vector[offset:offset + size].reshape(shape).copy()
            offset += size
        return out

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: tuple(value.shape) for name, value in self.items()}

    def size(self) -> int:
        return sum(int(value.size) for value in self.values())

    def flatten(self) -> Tensor:
        if not self:
            return np.zeros(0)
        return np.concatenate([np.asarray(value, dtype=np.float64).ravel() for value in self.values()])

    def copy(self) -> "ParameterSet":
        return ParameterSet((name, np.array(value, copy=True)) for name, value in self.items())

    def select(self, prefix: str) -> "ParameterSet":
        return ParameterSet((name, value) for name, value in self.items() if name.startswith(prefix))


def count_parameters(shapes: ShapeMap) -> int:
    return sum(int(np.prod(shape, dtype=np.int64)) for shape in shapes.values())

