"""Snapshot containers, train/test splitting and the ROMDAT1 file format.

ROMDAT1 layout (little-endian):
    magic "ROMDAT1"
    u32 C, H, W, T
    C variable names, each u32 length + ASCII bytes
    H latitudes float64, W longitudes float64
    float64 t0_hours, float64 dt_hours
    T·C·H·W float64 values, time-major then channel-major (row-major [T, C, H, W])
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..tensor.ops import Tensor
from ..utils.binary_io import RecordReader, RecordWriter
from ..utils.error_handler import DataError, FormatError, ShapeError
from ..utils.logger import get_logger

logger = get_logger(__name__)

DATA_MAGIC = b"ROMDAT1"


@dataclass
class DatasetDescriptor:
    """Grid, variables and (once fitted) per-variable normalization statistics."""
    variables: Tuple[str, ...]
    lat: Tensor
    lon: Tensor
    dt_hours: float = 6.0
    mean: Optional[Tensor] = None
    std: Optional[Tensor] = None

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        if len(self.lat) > 1:
            steps = np.diff(self.lat)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise DataError("latitudes must be strictly monotone")
        if np.any(np.abs(self.lat) > 90.0):
            raise DataError("latitudes must satisfy |lat| <= 90")
        if np.any(self.lon < 0.0) or np.any(self.lon >= 360.0) or np.any(np.diff(self.lon) <= 0):
            raise DataError("longitudes must be strictly increasing within [0, 360)")
        if self.dt_hours <= 0:
            raise DataError(f"time step must be positive, got {self.dt_hours}")
        if self.std is not None:
            self.mean = np.asarray(self.mean, dtype=np.float64)
            self.std = np.asarray(self.std, dtype=np.float64)
            if self.std.shape != (len(self.variables),) or self.mean.shape != self.std.shape:
                raise ShapeError("DatasetDescriptor", self.std.shape, (len(self.variables),))
            if np.any(self.std <= 0):
                raise DataError("every normalization std must be positive")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return len(self.variables), len(self.lat), len(self.lon)

    @property
    def normalized(self) -> bool:
        return self.std is not None


@dataclass
class GridSnapshot:
    """One time instant of C variables on the H×W grid."""
    timestamp: float
    values: Tensor


@dataclass
class SnapshotSequence:
    """Time-ordered snapshots stored as one [T, C, H, W] array."""
    descriptor: DatasetDescriptor
    timestamps: Tensor
    values: Tensor = field(repr=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4 or self.values.shape[1:] != self.descriptor.shape:
            raise ShapeError("SnapshotSequence", self.values.shape, self.descriptor.shape)
        if self.timestamps.shape != (self.values.shape[0],):
            raise ShapeError("SnapshotSequence", self.timestamps.shape, (self.values.shape[0],))
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise DataError("snapshot timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DataError("snapshot values must be finite")

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, index):
        if isinstance(index, slice):
            return SnapshotSequence(self.descriptor, self.timestamps[index], self.values[index])
        return GridSnapshot(float(self.timestamps[index]), self.values[index])

    def with_values(self, values: Tensor, descriptor: Optional[DatasetDescriptor] = None) -> "SnapshotSequence":
        return SnapshotSequence(descriptor or self.descriptor, self.timestamps, values)

    def flattened(self) -> Tensor:
        """[T, C·H·W] snapshot matrix (channel-major flattening)."""
        return self.values.reshape(len(self), -1)

    @classmethod
    def from_snapshots(cls, descriptor: DatasetDescriptor, snapshots: Sequence[GridSnapshot]) -> "SnapshotSequence":
        return cls(
            descriptor,
            np.array([s.timestamp for s in snapshots], dtype=np.float64),
            np.stack([np.asarray(s.values, dtype=np.float64) for s in snapshots]),
        )


def split(seq: SnapshotSequence, boundary: float) -> Tuple[SnapshotSequence, SnapshotSequence]:
    """Partition into (strictly before ``boundary``, at or after ``boundary``)."""
    cut = int(np.searchsorted(seq.timestamps, boundary, side="left"))
    if cut == 0:
        raise DataError(f"split at t={boundary} leaves the training side empty")
    if cut == len(seq):
        raise DataError(f"split at t={boundary} leaves the test side empty")
    return seq[:cut], seq[cut:]


def holdout_boundary(seq: SnapshotSequence, fraction: float = 0.1) -> float:
    """Timestamp of the first snapshot of the final ``fraction`` of the sequence."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"holdout fraction must lie in (0, 1), got {fraction}")
    n_test = max(1, int(round(len(seq) * fraction)))
    if n_test >= len(seq):
        raise DataError(f"sequence of {len(seq)} snapshots is too short to hold out {fraction:.0%}")
    return float(seq.timestamps[len(seq) - n_test])


def write_snapshots(path: Union[str, Path], seq: SnapshotSequence) -> Path:
    """Write ``seq`` as ROMDAT1; requires uniformly spaced timestamps."""
    channels, height, width = seq.descriptor.shape
    count = len(seq)
    dt = seq.descriptor.dt_hours if count < 2 else float(seq.timestamps[1] - seq.timestamps[0])
    t0 = float(seq.timestamps[0]) if count else 0.0
    expected = t0 + np.arange(count) * dt
    if not np.array_equal(expected, seq.timestamps):
        raise DataError("ROMDAT1 stores uniformly spaced timestamps only (t0 + k*dt)")

    writer = RecordWriter(DATA_MAGIC).u32(channels, height, width, count)
    for name in seq.descriptor.variables:
        writer.text(name)
    writer.f64(seq.descriptor.lat).f64(seq.descriptor.lon).f64([t0, dt]).f64(seq.values)
    path = writer.write(path)
    logger.debug(f"Wrote {count} snapshots ({channels}x{height}x{width}) to {path}")
    return path


def read_snapshots(path: Union[str, Path]) -> SnapshotSequence:
    """Read a ROMDAT1 file written by ``write_snapshots``."""
    reader = RecordReader.open(path, DATA_MAGIC, "ROMDAT1")
    channels = reader.u32("C")
    height = reader.u32("H")
    width = reader.u32("W")
    count = reader.u32("T")
    if min(channels, height, width) == 0:
        raise FormatError(f"ROMDAT1 header declares empty extents {channels}x{height}x{width}")
    names = tuple(reader.text(f"variable name {i}") for i in range(channels))
    lat = reader.f64(height, "latitudes")
    lon = reader.f64(width, "longitudes")
    t0, dt = reader.f64(2, "time axis")
    expected = count * channels * height * width * 8
    if reader.remaining != expected:
        raise FormatError(
            f"ROMDAT1 header declares {count} snapshots ({expected} bytes) but the payload has {reader.remaining} bytes"
        )
    values = reader.f64(count * channels * height * width, "values", (count, channels, height, width))
    reader.expect_end()
    descriptor = DatasetDescriptor(names, lat, lon, dt_hours=float(dt))
    return SnapshotSequence(descriptor, t0 + np.arange(count) * dt, values)


def renormalized_descriptor(descriptor: DatasetDescriptor, mean: Tensor, std: Tensor) -> DatasetDescriptor:
    return replace(descriptor, mean=np.asarray(mean, dtype=np.float64), std=np.asarray(std, dtype=np.float64))
