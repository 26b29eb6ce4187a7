"""Forecast experiments: in-window, out-of-window and boundary-straddling starts.

A start index ``s`` means the model is initialised from snapshots
``[s - d, s)`` and predicts ``[s, s + horizon)``. The training boundary is the
first held-out snapshot index.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..data.grid import latitude_weights
from ..data.snapshots import SnapshotSequence
from ..rom.forecast import LatentCodec, fit_codec_operator, forecast
from ..rom.operator import DelayRom
from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, DataError, InsufficientDataError, ShapeError
from ..utils.logger import StageLogger
from .metrics import lead_errors, persistence_baseline, reconstruction_floor
from .report import DelaySweep, ForecastReport, mean_over_starts

EXPERIMENT_KINDS = ("in_window", "out_of_window", "transition")


@dataclass(frozen=True)
class ExperimentConfig:
    num_starts: int = 10
    spacing: int = 12
    horizon: int = 32
    threads: int = 1
    denormalize: bool = False

    def validate(self) -> "ExperimentConfig":
        for key in ("num_starts", "spacing", "horizon", "threads"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"experiment.{key} must be at least 1, got {getattr(self, key)}")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def boundary_index(dataset: SnapshotSequence, boundary: float) -> int:
    """Index of the first snapshot at or after the boundary timestamp."""
    return int(np.searchsorted(dataset.timestamps, boundary, side="left"))


def experiment_starts(kind: str, n_total: int, boundary_idx: int, d: int, cfg: ExperimentConfig,
                      min_start: Optional[int] = None) -> List[int]:
    """Start indices for an experiment kind.

    in_window:     window and horizon inside [0, boundary)
    out_of_window: window and horizon inside [boundary, n_total)
    transition:    one start, horizon split evenly around the boundary
    """
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    cfg.validate()
    if d < 1:
        raise ConfigurationError(f"rom.d must be at least 1, got {d}")
    first = max(d, min_start or d)
    horizon = cfg.horizon

    if kind == "transition":
        if horizon < 2:
            raise ConfigurationError("experiment.horizon must be at least 2 for a transition run")
        start = boundary_idx - horizon // 2
        if start < first or start + horizon > n_total:
            raise InsufficientDataError(
                f"transition start {start} with d={d} and horizon {horizon} does not fit "
                f"{n_total} snapshots around boundary index {boundary_idx}"
            )
        return [start]

    if kind == "in_window":
        lo, hi = first, boundary_idx - horizon
    else:
        lo, hi = boundary_idx + first, n_total - horizon
    starts = [lo + i * cfg.spacing for i in range(cfg.num_starts)]
    starts = [s for s in starts if s <= hi]
    if len(starts) < cfg.num_starts:
        raise InsufficientDataError(
            f"{kind}: only {len(starts)} of {cfg.num_starts} starts fit "
            f"(d={d}, horizon={horizon}, spacing={cfg.spacing}, boundary index {boundary_idx}, {n_total} snapshots)"
        )
    return starts


def _run_start(codec: LatentCodec, rom: DelayRom, values: Tensor, start: int, horizon: int,
               weights: Tensor) -> Tuple[Tensor, Tensor]:
    truth = values[start : start + horizon]
    predicted = forecast(codec, rom, values[start - rom.d : start], horizon)
    persisted = persistence_baseline(values[start - 1], horizon)
    return lead_errors(truth, predicted, weights), lead_errors(truth, persisted, weights)


def run_experiment(
    kind: str,
    codec: LatentCodec,
    rom: DelayRom,
    dataset: SnapshotSequence,
    boundary: float,
    cfg: ExperimentConfig = ExperimentConfig(),
    weights=None,
    starts: Optional[Sequence[int]] = None,
) -> ForecastReport:
    """Forecast from every start and average the per-lead LW-RMSE.

    Args:
        kind: in_window, out_of_window or transition
        codec: Encoder/decoder the operator was fitted in
        rom: Delayed operator with rom.n == codec.latent_dim
        dataset: Normalized snapshots covering training and held-out periods
        boundary: Timestamp of the first held-out snapshot
        cfg: Starts, spacing, horizon, threads, units
        weights: Latitude weights; derived from the grid when omitted
        starts: Explicit start indices overriding the kind's placement

    Returns:
        ForecastReport with model, persistence and reconstruction-floor curves
    """
    cfg.validate()
    if codec.latent_dim != rom.n:
        raise ShapeError("run_experiment", (codec.latent_dim,), (rom.n,), detail="codec latent size differs from operator n")
    if tuple(dataset.descriptor.shape) != tuple(codec.field_shape):
        raise ShapeError("run_experiment", dataset.descriptor.shape, codec.field_shape, detail="dataset grid differs from codec")

    stage = StageLogger("experiment")
    b_idx = boundary_index(dataset, boundary)
    if starts is None:
        starts = experiment_starts(kind, len(dataset), b_idx, rom.d, cfg)
    starts = [int(s) for s in starts]
    for s in starts:
        if s < rom.d or s + cfg.horizon > len(dataset):
            raise InsufficientDataError(f"start {s} needs snapshots [{s - rom.d}, {s + cfg.horizon}) of {len(dataset)}")
    if weights is None:
        weights = latitude_weights(dataset.descriptor.lat).w

    stage.stage_start(f"kind={kind} codec={codec.name} d={rom.d} n={rom.n} starts={len(starts)} threads={cfg.threads}")
    values = dataset.values
    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        results = list(executor.map(lambda s: _run_start(codec, rom, values, s, cfg.horizon, weights), starts))

    per_start = np.stack([model for model, _ in results])
    baseline = mean_over_starts(np.stack([persisted for _, persisted in results]))
    horizon_idx = sorted({t for s in starts for t in range(s, s + cfg.horizon)})
    floor = reconstruction_floor(codec, values[horizon_idx], weights)

    units = "normalized"
    if cfg.denormalize:
        if not dataset.descriptor.normalized:
            raise DataError("cannot denormalize errors: dataset carries no normalization statistics")
        scale = np.asarray(dataset.descriptor.std, dtype=np.float64)
        per_start, baseline, floor = per_start * scale, baseline * scale, floor * scale
        units = "physical"

    config = {
        "d": rom.d,
        "n": rom.n,
        "codec": codec.name,
        "starts": starts,
        "horizon": cfg.horizon,
        "boundary_index": b_idx,
        "units": units,
    }
    if kind == "transition":
        config["boundary_lead"] = b_idx - starts[0]
    report = ForecastReport(
        kind, dataset.descriptor.variables, mean_over_starts(per_start), baseline, floor,
        per_start=per_start, config=config,
    )
    curve = report.mean_curve()
    stage.info(f"lead 1 lw_rmse={curve[0]:.4e} lead {report.horizon} lw_rmse={curve[-1]:.4e} floor={floor.mean():.4e}")
    stage.stage_complete()
    return report


def delay_sweep(
    codec: LatentCodec,
    dataset: SnapshotSequence,
    boundary: float,
    d_list: Sequence[int],
    cfg: ExperimentConfig = ExperimentConfig(),
    ridge: float = 0.0,
    weights=None,
) -> DelaySweep:
    """Mean in-window forecast LW-RMSE for each delay depth.

    Every depth is fitted on the training split and evaluated from the same
    starts, placed for the largest depth.
    """
    d_list = [int(d) for d in d_list]
    if not d_list or any(d < 1 for d in d_list) or any(b <= a for a, b in zip(d_list, d_list[1:])):
        raise ConfigurationError(f"rom.d_list must be strictly ascending positive depths, got {d_list}")
    b_idx = boundary_index(dataset, boundary)
    if b_idx < 1:
        raise InsufficientDataError("delay sweep needs at least one training snapshot before the boundary")
    starts = experiment_starts("in_window", len(dataset), b_idx, d_list[-1], cfg)
    train_values = dataset.values[:b_idx]

    stage = StageLogger("delay-sweep")
    stage.stage_start(f"d={d_list} codec={codec.name}")
    errors = []
    for d in d_list:
        rom, _, _ = fit_codec_operator(codec, train_values, d, ridge, dataset.descriptor.dt_hours)
        report = run_experiment("in_window", codec, rom, dataset, boundary, cfg, weights=weights, starts=starts)
        errors.append(float(report.mean_curve().mean()))
        stage.info(f"d={d} mean lw_rmse={errors[-1]:.6e}")
    stage.stage_complete()
    return DelaySweep(d_list, errors)
