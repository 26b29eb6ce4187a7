"""Snapshot I/O, normalization, latitude weighting and synthetic data."""
from .grid import DEFAULT_VARIABLES, LatitudeWeights, latitude_grid, latitude_weights, longitude_grid
from .manifest import ManifestEntry, read_manifest, record_in_manifest, write_manifest
from .normalization import compute_statistics, denormalize, normalize, normalize_splits
from .snapshots import (
    DatasetDescriptor,
    GridSnapshot,
    SnapshotSequence,
    holdout_boundary,
    read_snapshots,
    split,
    write_snapshots,
)
from .synthetic import SynthComponents, SynthConfig, discrete_divergence, draw_components, synth_fields_at, synth_generate

__all__ = [
    "DEFAULT_VARIABLES",
    "LatitudeWeights",
    "latitude_grid",
    "latitude_weights",
    "longitude_grid",
    "ManifestEntry",
    "read_manifest",
    "record_in_manifest",
    "write_manifest",
    "compute_statistics",
    "denormalize",
    "normalize",
    "normalize_splits",
    "DatasetDescriptor",
    "GridSnapshot",
    "SnapshotSequence",
    "holdout_boundary",
    "read_snapshots",
    "split",
    "write_snapshots",
    "SynthComponents",
    "SynthConfig",
    "discrete_divergence",
    "draw_components",
    "synth_fields_at",
    "synth_generate",
]
