"""Global per-variable normalization.

Statistics are computed over every (time, lat, lon) point of a variable on
the TRAINING split only and stored in the DatasetDescriptor; any other split
is normalized with those stored statistics.
"""
from typing import Optional, Tuple

import numpy as np

from ..tensor.ops import Tensor
from ..utils.error_handler import DataError, ShapeError
from ..utils.logger import get_logger
from .snapshots import DatasetDescriptor, SnapshotSequence, renormalized_descriptor

logger = get_logger(__name__)


def compute_statistics(values: Tensor, variables=None) -> Tuple[Tensor, Tensor]:
    """Per-variable mean and population standard deviation of [T, C, H, W] values."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 4 or values.shape[0] == 0:
        raise DataError(f"statistics need a non-empty [T, C, H, W] array, got shape {values.shape}")
    mean = values.mean(axis=(0, 2, 3))
    std = values.std(axis=(0, 2, 3))
    names = list(variables) if variables is not None else [f"variable {i}" for i in range(len(std))]
    for name, m, s in zip(names, mean, std):
        # a constant field can leave rounding-level spread behind
        if not np.isfinite(s) or s <= 1e-12 * max(1.0, abs(m)):
            raise DataError(f"variable {name!r} has zero variance on the training split; cannot normalize")
    return mean, std


def normalize(
    seq: SnapshotSequence,
    descriptor: Optional[DatasetDescriptor] = None,
) -> Tuple[SnapshotSequence, DatasetDescriptor]:
    """Normalize ``seq`` to zero mean and unit variance per variable.

    Args:
        seq: Snapshots to normalize
        descriptor: Descriptor carrying training statistics; when it has none
            (or is omitted and ``seq`` has none) the statistics are computed
            from ``seq`` itself, which must then be the training split

    Returns:
        (normalized sequence, descriptor holding the statistics used)
    """
    descriptor = descriptor or seq.descriptor
    if descriptor.shape != seq.descriptor.shape:
        raise ShapeError("normalize", seq.descriptor.shape, descriptor.shape)
    if not descriptor.normalized:
        mean, std = compute_statistics(seq.values, descriptor.variables)
        descriptor = renormalized_descriptor(descriptor, mean, std)
        logger.debug(
            "Normalization statistics: "
            + ", ".join(f"{v}: mean={m:.4g} std={s:.4g}" for v, m, s in zip(descriptor.variables, mean, std))
        )
    values = (seq.values - descriptor.mean[None, :, None, None]) / descriptor.std[None, :, None, None]
    return SnapshotSequence(descriptor, seq.timestamps, values), descriptor


def denormalize(values: Tensor, descriptor: DatasetDescriptor) -> Tensor:
    """Inverse of ``normalize`` for any [..., C, H, W] array."""
    if not descriptor.normalized:
        raise DataError("descriptor carries no normalization statistics")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim < 3 or values.shape[-3] != len(descriptor.variables):
        raise ShapeError("denormalize", values.shape, descriptor.shape)
    return values * descriptor.std[:, None, None] + descriptor.mean[:, None, None]


def normalize_splits(
    train: SnapshotSequence, *others: SnapshotSequence
) -> Tuple[DatasetDescriptor, Tuple[SnapshotSequence, ...]]:
    """Fit statistics on ``train`` and apply them to every split.

    Returns:
        (descriptor, (normalized train, normalized others...))
    """
    normalized_train, descriptor = normalize(train)
    rest = tuple(normalize(other, descriptor)[0] for other in others)
    return descriptor, (normalized_train,) + rest
