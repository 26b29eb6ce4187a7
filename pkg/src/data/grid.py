"""Lat-lon grid conventions and latitude weights.

Latitudes run south to north, inclusive of both poles (H points from −90° to
90°); longitudes are W equally spaced points in [0, 360). Pole rows get weight
zero, which the weighted error permits.
"""
from dataclasses import dataclass

import numpy as np

from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, DataError

DEFAULT_VARIABLES = ("u10", "v10", "T2m", "Pmsl")


def latitude_grid(height: int) -> Tensor:
    if height < 1:
        raise ConfigurationError(f"grid.height must be positive, got {height}")
    if height == 1:
        return np.zeros(1)
    return np.linspace(-90.0, 90.0, height)


def longitude_grid(width: int) -> Tensor:
    if width < 1:
        raise ConfigurationError(f"grid.width must be positive, got {width}")
    return np.arange(width) * (360.0 / width)


@dataclass(frozen=True)
class LatitudeWeights:
    """Per-row weights w(φ_i) = cos φ_i / mean_j cos φ_j (unit mean)."""
    w: Tensor

    def __len__(self) -> int:
        return len(self.w)

    def as_row_weights(self) -> Tensor:
        """Broadcastable [1, 1, H, 1] view for [B, C, H, W] fields."""
        return self.w.reshape(1, 1, -1, 1)

    @classmethod
    def uniform(cls, height: int) -> "LatitudeWeights":
        return cls(np.ones(height))


def latitude_weights(lat) -> LatitudeWeights:
    """Cosine latitude weights normalised to unit mean.

    Args:
        lat: Latitudes in degrees, |lat| ≤ 90

    Returns:
        LatitudeWeights with mean exactly representable as 1 (to rounding)
    """
    lat = np.asarray(lat, dtype=np.float64)
    if lat.ndim != 1 or lat.size == 0:
        raise DataError(f"latitudes must be a non-empty vector, got shape {lat.shape}")
    if np.any(np.abs(lat) > 90.0):
        raise DataError(f"latitudes must satisfy |lat| <= 90, got extremes {lat.min()}..{lat.max()}")
    cosines = np.cos(np.deg2rad(lat))
    # cos(±90°) is ~6e-17 in floating point, not 0
    cosines[np.isclose(np.abs(lat), 90.0, rtol=0.0, atol=1e-12)] = 0.0
    mean_cos = cosines.mean()
    if mean_cos <= 0.0:
        raise DataError("latitude weights are undefined: every latitude is a pole (cosine sum is zero)")
    return LatitudeWeights(cosines / mean_cos)
