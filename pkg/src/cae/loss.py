"""Latitude-weighted RMSE.

For one variable c over a batch of B fields on an H×W grid:

    LW-RMSE_c = sqrt( (1/(B·H·W)) Σ_b Σ_i Σ_j w(φ_i) (X − X̂)²_{b,c,i,j} )

The training/reporting scalar is the arithmetic mean of LW-RMSE_c over the
variables. ``lw_rmse_pooled`` instead takes one root over all variables.
"""
from typing import Union

import numpy as np

from ..data.grid import LatitudeWeights
from ..tensor.graph import Graph, Var
from ..tensor.ops import Tensor
from ..utils.error_handler import DataError, ShapeError

WeightsLike = Union[LatitudeWeights, Tensor]


def _as_batch(x) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None]
    if x.ndim != 4:
        raise ShapeError("lw_rmse", x.shape, detail="expected [C, H, W] or [B, C, H, W]")
    return x


def row_weights(weights: WeightsLike, height: int) -> Tensor:
    """Validated [H] weight vector."""
    w = weights.w if isinstance(weights, LatitudeWeights) else np.asarray(weights, dtype=np.float64)
    if w.shape != (height,):
        raise ShapeError("lw_rmse", w.shape, (height,), detail="weights length must equal H")
    if np.any(w < 0):
        raise DataError("latitude weights must be non-negative")
    return w


def weighted_squared_error(X, Xhat, weights: WeightsLike) -> Tensor:
    """Per-variable weighted mean squared error, shape [C]."""
    X, Xhat = _as_batch(X), _as_batch(Xhat)
    if X.shape != Xhat.shape:
        raise ShapeError("lw_rmse", X.shape, Xhat.shape)
    w = row_weights(weights, X.shape[2])
    return np.mean((X - Xhat) ** 2 * w[None, None, :, None], axis=(0, 2, 3))


def lw_rmse_per_variable(X, Xhat, weights: WeightsLike) -> Tensor:
    return np.sqrt(weighted_squared_error(X, Xhat, weights))


def lw_rmse(X, Xhat, weights: WeightsLike) -> float:
    """Mean over variables of the per-variable LW-RMSE."""
    return float(np.mean(lw_rmse_per_variable(X, Xhat, weights)))


def lw_rmse_pooled(X, Xhat, weights: WeightsLike) -> float:
    """Single root over all variables: sqrt(mean_c weighted MSE_c)."""
    return float(np.sqrt(np.mean(weighted_squared_error(X, Xhat, weights))))


def lw_rmse_node(g: Graph, prediction: Var, target: Var, weights: WeightsLike) -> Var:
    """Differentiable LW-RMSE (mean over variables) recorded on ``g``; returns a [1,1,1,1] scalar."""
    if prediction.shape != target.shape:
        raise ShapeError("lw_rmse", prediction.shape, target.shape)
    w = row_weights(weights, prediction.shape[2])
    diff = g.apply("subtract", prediction, target)
    weighted = g.apply("multiply", g.apply("square", diff), g.constant(w.reshape(1, 1, -1, 1)))
    per_variable = g.apply("sqrt", g.apply("mean", weighted, axes=(0, 2, 3)))
    return g.apply("mean", per_variable)
