"""Shared fixtures. File logging is disabled for the whole test session."""
import os

os.environ.setdefault("LOG_TO_FILE", "0")
os.environ.setdefault("LOG_LEVEL", "WARNING")

import numpy as np
import pytest

from src.cae.model import CaeArchitecture
from src.data.snapshots import DatasetDescriptor, SnapshotSequence
from src.data.grid import latitude_grid, longitude_grid
from src.data.synthetic import SynthConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_arch():
    """One-stage autoencoder on a 2x6x8 grid (latent 2x3x4)."""
    return CaeArchitecture(
        channels=2, height=6, width=8, stem_channels=4, stage_channels=(4,), latent_channels=2, reduction=2
    )


@pytest.fixture
def small_synth():
    return SynthConfig(height=12, width=16, steps=240, n_waves=3, n_noise=2, noise_amplitude=0.01)


def _make_sequence(values, dt=6.0, t0=0.0, variables=None):
    values = np.asarray(values, dtype=np.float64)
    n, c, h, w = values.shape
    names = tuple(variables or (f"v{i}" for i in range(c)))
    descriptor = DatasetDescriptor(names, latitude_grid(h), longitude_grid(w), dt_hours=dt)
    return SnapshotSequence(descriptor, t0 + np.arange(n) * dt, values)


@pytest.fixture
def make_sequence():
    """Factory wrapping [N, C, H, W] values in a SnapshotSequence on a regular grid."""
    return _make_sequence
