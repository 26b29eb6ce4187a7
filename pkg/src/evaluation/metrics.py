"""Forecast error metrics and the persistence baseline."""
import numpy as np

from ..cae.loss import WeightsLike, lw_rmse_per_variable, row_weights
from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, ShapeError


def persistence_baseline(initial, T: int) -> Tensor:
    """Repeat a [C, H, W] snapshot T times."""
    initial = np.asarray(initial, dtype=np.float64)
    if initial.ndim != 3:
        raise ShapeError("persistence_baseline", initial.shape, detail="initial snapshot must be [C, H, W]")
    if T < 1:
        raise ConfigurationError(f"forecast horizon must be at least 1, got {T}")
    return np.repeat(initial[None], T, axis=0)


def lead_errors(truth, prediction, weights: WeightsLike) -> Tensor:
    """Per-lead, per-variable LW-RMSE of [T, C, H, W] fields; returns [T, C]."""
    truth = np.asarray(truth, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    if truth.shape != prediction.shape or truth.ndim != 4:
        raise ShapeError("lead_errors", truth.shape, prediction.shape)
    w = row_weights(weights, truth.shape[2])
    return np.sqrt(np.mean((truth - prediction) ** 2 * w[None, None, :, None], axis=(2, 3)))


def reconstruction_floor(codec, fields, weights: WeightsLike) -> Tensor:
    """Per-variable LW-RMSE of decode(encode(x)) against x over [N, C, H, W] fields."""
    fields = np.asarray(fields, dtype=np.float64)
    return lw_rmse_per_variable(fields, codec.decode(codec.encode(fields)), weights)
