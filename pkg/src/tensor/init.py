"""Parameter initializers."""
from typing import Sequence, Tuple

import numpy as np

from .ops import Tensor


def fans(shape: Sequence[int], transposed: bool = False) -> Tuple[int, int]:
    """(fan_in, fan_out) for a linear weight [out,in] or a conv kernel.

    Conv kernels are [Cout,Cin,kh,kw]; transposed-conv kernels are [Cin,Cout,kh,kw].
    """
    if len(shape) == 2:
        return int(shape[1]), int(shape[0])
    receptive = int(np.prod(shape[2:]))
    rows, cols = int(shape[0]), int(shape[1])
    if transposed:
        return rows * receptive, cols * receptive
    return cols * receptive, rows * receptive


def glorot_uniform(rng: np.random.Generator, shape: Sequence[int], transposed: bool = False) -> Tensor:
    """Uniform on ±sqrt(6/(fan_in + fan_out))."""
    fan_in, fan_out = fans(shape, transposed)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=tuple(shape))
