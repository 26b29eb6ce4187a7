"""Adam optimizer over named parameter arrays.

    m_t = β1·m_{t-1} + (1 − β1)·g
    v_t = β2·v_{t-1} + (1 − β2)·g²
    p_t = p_{t-1} − lr · m̂_t / (sqrt(v̂_t) + ε),  m̂_t = m_t/(1 − β1^t), v̂_t = v_t/(1 − β2^t)

Updates return new arrays; parameters handed in are never modified.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..utils.error_handler import ShapeError
from .ops import Tensor


@dataclass
class AdamState:
    """Per-parameter moments plus hyperparameters and the step counter."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, Tensor] = field(default_factory=dict)
    v: Dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, Tensor], **hyper) -> "AdamState":
        state = cls(**hyper)
        for name, value in params.items():
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        return state


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    state: AdamState,
    learning_rate: Optional[float] = None,
) -> Tuple[Dict[str, Tensor], AdamState]:
    """Apply one bias-corrected Adam update.

    Args:
        params: Current parameter arrays by name
        grads: Gradient per parameter (same names and shapes)
        state: Moments and hyperparameters; updated in place and returned
        learning_rate: Optional override (used by the plateau scheduler)

    Returns:
        (new parameter dict, state)
    """
    if set(params) != set(grads):
        missing = sorted(set(params) ^ set(grads))
        raise ShapeError("adam_step", (len(params),), (len(grads),), detail=f"unmatched names {missing[:5]}")
    for name, value in params.items():
        if grads[name].shape != value.shape:
            raise ShapeError("adam_step", value.shape, grads[name].shape, detail=f"gradient of {name}")
        if name in state.m and state.m[name].shape != value.shape:
            raise ShapeError("adam_step", value.shape, state.m[name].shape, detail=f"moment of {name}")

    lr = state.learning_rate if learning_rate is None else learning_rate
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    updated: Dict[str, Tensor] = {}
    for name, value in params.items():
        g = grads[name]
        m = b1 * state.m.get(name, np.zeros_like(value)) + (1.0 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(value)) + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = value - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated, state
