"""Deterministic synthetic atmosphere on a lat-lon grid.

Four variables (u10, v10, T2m, Pmsl) are closed-form functions of time built
from the same set of wave phases:

    ψ(φ,λ,t)  = Σ_k a_k E_k(φ) cos(m_k λ − ω_k t + α_k)
                + s(t) sin φ cos φ + η_ψ(φ,λ,t)
    T'(φ,λ,t) = Σ_k τ_k a_k E_k(φ) cos(m_k λ − ω_k t + α_k + δ_k)
                + s(t) sin φ + η_T(φ,λ,t)

with envelopes E_k(φ) = cos φ · exp(−((φ − c_k)/width)²) centred on a random
latitude band per wave, so the local phase speed depends on latitude;
ω_k > 0 moves a wave eastward, ω_k < 0 westward. s(t) is the seasonal drift
and η are stationary random-phase sinusoid sums.

Winds come from index-space centred differences of ψ (periodic in longitude),
so the discrete divergence δx u + δy v vanishes on every interior row:

    u = −WIND_SCALE · (ψ[i+1, j] − ψ[i−1, j]) / 2
    v =  WIND_SCALE · (ψ[i, j+1] − ψ[i, j−1]) / 2

ψ is evaluated on the grid extended by one row beyond each pole so u is
defined on every row.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError
from ..utils.logger import get_logger
from .grid import DEFAULT_VARIABLES, latitude_grid, longitude_grid
from .snapshots import DatasetDescriptor, SnapshotSequence

logger = get_logger(__name__)

WAVE_PERIOD_RANGE_HOURS = (48.0, 240.0)
NOISE_PERIOD_RANGE_HOURS = (18.0, 96.0)
ENVELOPE_WIDTH_DEG = 25.0
WIND_SCALE = 20.0
T_MEAN, T_CONTRAST, T_SCALE = 288.0, 30.0, 8.0
P_MEAN, P_SCALE, P_THERMAL = 101325.0, 1200.0, 0.3
CHUNK_STEPS = 256


@dataclass(frozen=True)
class SynthConfig:
    """Extents and knobs of the synthetic generator."""
    height: int = 33
    width: int = 48
    steps: int = 2000
    dt_hours: float = 6.0
    t0_hours: float = 0.0
    n_waves: int = 6
    n_noise: int = 8
    noise_amplitude: float = 0.05
    season_period_hours: float = 8766.0
    season_amplitude: float = 0.3

    def validate(self) -> "SynthConfig":
        if self.height < 8:
            raise ConfigurationError(f"grid.height must be at least 8, got {self.height}")
        if self.width < 8:
            raise ConfigurationError(f"grid.width must be at least 8, got {self.width}")
        if self.steps < 1:
            raise ConfigurationError(f"grid.steps must be at least 1, got {self.steps}")
        if self.dt_hours <= 0:
            raise ConfigurationError(f"grid.dt_hours must be positive, got {self.dt_hours}")
        if not 1 <= self.n_waves < self.width // 2:
            raise ConfigurationError(
                f"grid.n_waves must lie in [1, width/2) so zonal wavenumbers stay resolved, got {self.n_waves}"
            )
        if self.n_noise < 0 or self.noise_amplitude < 0 or self.season_amplitude < 0:
            raise ConfigurationError("grid.n_noise, grid.noise_amplitude and grid.season_amplitude must be non-negative")
        if self.season_period_hours <= 0:
            raise ConfigurationError(f"grid.season_period_hours must be positive, got {self.season_period_hours}")
        return self


@dataclass(frozen=True)
class SynthComponents:
    """Random draws that, with a SynthConfig, fully determine the fields.

    Noise arrays have two rows: row 0 perturbs the streamfunction, row 1 the
    temperature anomaly.
    """
    wave_amplitude: Tensor
    wave_zonal: np.ndarray
    wave_center: Tensor
    wave_omega: Tensor
    wave_phase: Tensor
    temp_amplitude: Tensor
    temp_shift: Tensor
    season_phase: float
    noise_amplitude: Tensor
    noise_zonal: np.ndarray
    noise_meridional: np.ndarray
    noise_omega: Tensor
    noise_phase: Tensor
    noise_lat_phase: Tensor


def draw_components(cfg: SynthConfig, seed: int) -> SynthComponents:
    rng = np.random.default_rng(seed)
    k, j = cfg.n_waves, cfg.n_noise
    two_pi = 2.0 * np.pi

    amplitude = rng.uniform(0.5, 1.0, k)
    center = np.deg2rad(rng.uniform(-60.0, 60.0, k))
    period = rng.uniform(*WAVE_PERIOD_RANGE_HOURS, k)
    direction = rng.choice([-1.0, 1.0], k)
    phase = rng.uniform(0.0, two_pi, k)
    temp_amplitude = rng.uniform(0.3, 1.0, k)
    temp_shift = rng.uniform(-np.pi / 2, np.pi / 2, k)
    season_phase = float(rng.uniform(0.0, two_pi))

    noise_amplitude = cfg.noise_amplitude * rng.uniform(0.5, 1.0, (2, j))
    noise_zonal = rng.integers(1, 5, (2, j))
    noise_meridional = rng.integers(1, 4, (2, j))
    noise_period = rng.uniform(*NOISE_PERIOD_RANGE_HOURS, (2, j))
    noise_direction = rng.choice([-1.0, 1.0], (2, j))
    noise_phase = rng.uniform(0.0, two_pi, (2, j))
    noise_lat_phase = rng.uniform(0.0, two_pi, (2, j))

    return SynthComponents(
        wave_amplitude=amplitude,
        # distinct wavenumbers keep the waves orthogonal around every latitude circle
        wave_zonal=np.arange(1, k + 1),
        wave_center=center,
        wave_omega=direction * two_pi / period,
        wave_phase=phase,
        temp_amplitude=temp_amplitude,
        temp_shift=temp_shift,
        season_phase=season_phase,
        noise_amplitude=noise_amplitude,
        noise_zonal=noise_zonal,
        noise_meridional=noise_meridional,
        noise_omega=noise_direction * two_pi / noise_period,
        noise_phase=noise_phase,
        noise_lat_phase=noise_lat_phase,
    )


def extended_latitudes(height: int) -> Tensor:
    """Latitude grid (degrees) with one extra row beyond each pole."""
    lat = latitude_grid(height)
    spacing = lat[1] - lat[0]
    return np.concatenate([[lat[0] - spacing], lat, [lat[-1] + spacing]])


def _noise(row: int, comp: SynthComponents, phi, lam, t) -> Tensor:
    out = np.zeros(np.broadcast_shapes(t.shape, phi.shape, lam.shape))
    for j in range(comp.noise_amplitude.shape[1]):
        meridional = np.cos(phi) * np.cos(comp.noise_meridional[row, j] * phi + comp.noise_lat_phase[row, j])
        travelling = np.cos(comp.noise_zonal[row, j] * lam - comp.noise_omega[row, j] * t + comp.noise_phase[row, j])
        out += comp.noise_amplitude[row, j] * meridional * travelling
    return out


def _potentials(cfg: SynthConfig, comp: SynthComponents, phi, lam, t) -> Tuple[Tensor, Tensor]:
    """(ψ, T') on the broadcast of t [nt,1,1], phi [1,h,1], lam [1,1,W]."""
    width = np.deg2rad(ENVELOPE_WIDTH_DEG)
    season = cfg.season_amplitude * np.cos(2.0 * np.pi * t / cfg.season_period_hours + comp.season_phase)
    psi = season * np.sin(phi) * np.cos(phi) + _noise(0, comp, phi, lam, t)
    temp = season * np.sin(phi) + _noise(1, comp, phi, lam, t)
    for k in range(len(comp.wave_amplitude)):
        envelope = comp.wave_amplitude[k] * np.cos(phi) * np.exp(-(((phi - comp.wave_center[k]) / width) ** 2))
        argument = comp.wave_zonal[k] * lam - comp.wave_omega[k] * t + comp.wave_phase[k]
        psi = psi + envelope * np.cos(argument)
        temp = temp + comp.temp_amplitude[k] * envelope * np.cos(argument + comp.temp_shift[k])
    return psi, temp


def synth_fields_at(cfg: SynthConfig, comp: SynthComponents, times) -> Tensor:
    """Evaluate all four variables at arbitrary times (hours); returns [nt, 4, H, W]."""
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))[:, None, None]
    phi_ext = np.deg2rad(extended_latitudes(cfg.height))[None, :, None]
    lam = np.deg2rad(longitude_grid(cfg.width))[None, None, :]

    psi_ext, temp_ext = _potentials(cfg, comp, phi_ext, lam, t)
    psi = psi_ext[:, 1:-1, :]
    temp = temp_ext[:, 1:-1, :]
    phi = phi_ext[:, 1:-1, :]

    u = -WIND_SCALE * (psi_ext[:, 2:, :] - psi_ext[:, :-2, :]) / 2.0
    v = WIND_SCALE * (np.roll(psi, -1, axis=2) - np.roll(psi, 1, axis=2)) / 2.0
    t2m = T_MEAN - T_CONTRAST * np.sin(phi) ** 2 + T_SCALE * temp
    pmsl = P_MEAN + P_SCALE * (psi + P_THERMAL * temp)
    return np.stack([u, v, t2m, pmsl], axis=1)


def synth_generate(cfg: SynthConfig, seed: int) -> SnapshotSequence:
    """Generate ``cfg.steps`` snapshots spaced ``cfg.dt_hours`` apart starting at ``cfg.t0_hours``.

    The output is a pure function of (cfg, seed): the same inputs give
    bit-identical sequences.
    """
    cfg.validate()
    comp = draw_components(cfg, seed)
    timestamps = cfg.t0_hours + np.arange(cfg.steps) * cfg.dt_hours
    values = np.empty((cfg.steps, len(DEFAULT_VARIABLES), cfg.height, cfg.width))
    for start in range(0, cfg.steps, CHUNK_STEPS):
        stop = min(start + CHUNK_STEPS, cfg.steps)
        values[start:stop] = synth_fields_at(cfg, comp, timestamps[start:stop])

    descriptor = DatasetDescriptor(
        DEFAULT_VARIABLES, latitude_grid(cfg.height), longitude_grid(cfg.width), dt_hours=cfg.dt_hours
    )
    logger.info(
        f"Generated {cfg.steps} synthetic snapshots on a {cfg.height}x{cfg.width} grid "
        f"(seed={seed}, waves={cfg.n_waves}, noise terms={cfg.n_noise})"
    )
    return SnapshotSequence(descriptor, timestamps, values)


def discrete_divergence(u: Tensor, v: Tensor) -> Tensor:
    """Index-space centred divergence δx u + δy v on interior rows; periodic in longitude.

    Accepts [..., H, W] arrays and returns [..., H-2, W].
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    du_dx = (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / 2.0
    dv_dy = (v[..., 2:, :] - v[..., :-2, :]) / 2.0
    return du_dx[..., 1:-1, :] + dv_dy
