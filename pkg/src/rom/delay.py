"""Latent sequences and time-delay embedding.

A delay vector stacks d consecutive states newest first:
    z_k^td = [z_k; z_{k-1}; ...; z_{k-d+1}]
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, InsufficientDataError, ShapeError


@dataclass
class LatentSequence:
    """Time-ordered latent states [N, n] spaced ``dt`` hours apart."""
    states: Tensor
    dt: float = 6.0
    t0: float = 0.0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.ndim != 2:
            raise ShapeError("LatentSequence", self.states.shape, detail="states must be [N, n]")
        if self.dt <= 0:
            raise ConfigurationError(f"latent time step must be positive, got {self.dt}")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def timestamps(self) -> Tensor:
        return self.t0 + np.arange(len(self)) * self.dt

    @classmethod
    def from_latents(cls, latents: Tensor, dt: float = 6.0, t0: float = 0.0) -> "LatentSequence":
        """Flatten [N, c, h, w] (or [N, n]) latents channel-major."""
        latents = np.asarray(latents, dtype=np.float64)
        return cls(latents.reshape(len(latents), -1), dt, t0)


def delay_vector(window: Tensor) -> Tensor:
    """Stack a [d, n] window (oldest first) into the newest-first delay vector."""
    window = np.asarray(window, dtype=np.float64)
    return window[::-1].reshape(-1)


def build_delay_matrices(seq, d: int) -> Tuple[Tensor, Tensor]:
    """(Z_td [n·d, N−d], Z_future [n, N−d]) for delay depth ``d``.

    Column j of Z_td is [z_{j+d-1}; ...; z_j] and column j of Z_future is
    z_{j+d} (0-based state indices).
    """
    states = seq.states if isinstance(seq, LatentSequence) else LatentSequence(seq).states
    if d < 1:
        raise ConfigurationError(f"rom.d must be at least 1, got {d}")
    count = len(states)
    if count < d + 1:
        raise InsufficientDataError(f"delay depth d={d} needs at least {d + 1} states, got {count}")
    z_td = np.vstack([states[d - 1 - b:count - 1 - b].T for b in range(d)])
    z_future = states[d:].T.copy()
    return z_td, z_future
