"""Command-line interface for the AttnROM pipeline.

Usage:
    python -m src.cli gen-data --out runs/desk/data.romdat
    python -m src.cli train-cae --data runs/desk/data.romdat --out runs/desk/cae.romcae
    python -m src.cli train-cae --data runs/desk/data.romdat --out runs/desk/cae_nocbam.romcae --no-cbam
    python -m src.cli fit-pod --data runs/desk/data.romdat --out runs/desk/pod.rompod
    python -m src.cli fit-rom --data runs/desk/data.romdat --codec runs/desk/cae.romcae --out runs/desk/op.romop
    python -m src.cli experiment --data ... --codec ... --operator ... --kind all --out-dir runs/desk/reports

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 data error, 4 numerical failure.
"""
import argparse
import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from config.default_config import LOGGING_CONFIG, REFERENCE_SCALE_CAE_CONFIG

from ..cae.checkpoint import load_model, save_model
from ..cae.loss import lw_rmse_per_variable
from ..cae.model import CaeArchitecture, build_model
from ..cae.trainer import evaluate_loss, read_trace, train, write_trace
from ..data.grid import DEFAULT_VARIABLES, LatitudeWeights, latitude_weights
from ..data.manifest import ManifestEntry, record_in_manifest
from ..data.normalization import denormalize, normalize, normalize_splits
from ..data.snapshots import DatasetDescriptor, SnapshotSequence, holdout_boundary, read_snapshots, split, write_snapshots
from ..data.synthetic import synth_generate
from ..evaluation.experiments import EXPERIMENT_KINDS, ExperimentConfig, delay_sweep, run_experiment
from ..evaluation.report import (
    CompressionRow,
    ablation_table,
    compression_table,
    reference_rows,
    write_table,
)
from ..pod.basis import energy_spectrum, feature_weights, fit_pod, pod_sweep
from ..pod.checkpoint import save_basis
from ..rom.checkpoint import load_operator, save_operator
from ..rom.forecast import LatentCodec, fit_codec_operator, forecast, load_codec
from ..utils.error_handler import ConfigurationError, GracefulErrorHandler, safe_command_execution
from ..utils.logger import StageLogger, _env_flag, get_logger, setup_logging
from .run_config import RunConfig, load_run_config

logger = get_logger(__name__)

QUOTED_POD_RATIO = 121


@dataclass
class PreparedData:
    """Raw sequence, its normalized form and the training/held-out split."""
    raw: SnapshotSequence
    normalized: SnapshotSequence
    train: SnapshotSequence
    test: SnapshotSequence
    descriptor: DatasetDescriptor
    boundary: float

    @property
    def weights(self) -> LatitudeWeights:
        return latitude_weights(self.descriptor.lat)


def prepare_data(path: str, cfg: RunConfig) -> PreparedData:
    """Read ROMDAT1, hold out the final fraction and normalize with training statistics."""
    raw = read_snapshots(path)
    boundary = holdout_boundary(raw, cfg.grid.holdout_fraction)
    train_raw, test_raw = split(raw, boundary)
    descriptor, (train_n, test_n) = normalize_splits(train_raw, test_raw)
    full_n, _ = normalize(raw, descriptor)
    logger.debug(f"{path}: {len(train_n)} training and {len(test_n)} held-out snapshots (boundary t={boundary})")
    return PreparedData(raw, full_n, train_n, test_n, descriptor, boundary)


def _run_config(args) -> RunConfig:
    threads = args.threads
    if threads is None and os.getenv("ATTNROM_THREADS"):
        try:
            threads = int(os.environ["ATTNROM_THREADS"])
        except ValueError:
            raise ConfigurationError(f"ATTNROM_THREADS must be an integer, got {os.environ['ATTNROM_THREADS']!r}")
    return load_run_config(args.config).with_overrides(seed=args.seed, threads=threads)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, default=str))


def _trace_path(checkpoint: Path) -> Path:
    return checkpoint.with_suffix(".loss.csv")


# ===================================================================================
# DATA
# ===================================================================================

@safe_command_execution("gen-data")
def cmd_gen_data(args) -> None:
    cfg = _run_config(args)
    stage = StageLogger("gen-data")
    stage.stage_start(f"seed={cfg.runtime.seed}")
    seq = synth_generate(cfg.grid.synth_config(), cfg.runtime.seed)
    out = write_snapshots(args.out, seq)
    stage.artifact("snapshots", out)
    manifest = Path(args.manifest) if args.manifest else out.parent / "manifest.csv"
    record_in_manifest(manifest, ManifestEntry.for_sequence(out, seq))
    stage.stage_complete()
    _print_json({"path": out, "count": len(seq), "shape": seq.descriptor.shape, "manifest": manifest})


# ===================================================================================
# AUTOENCODER
# ===================================================================================

@safe_command_execution("train-cae")
def cmd_train_cae(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    stage = StageLogger("train-cae")
    train_cfg = cfg.train.train_config(cfg.runtime.seed)
    if args.epochs is not None:
        train_cfg = replace(train_cfg, epochs=args.epochs).validate()

    resume_trace = None
    if args.resume:
        model = load_model(args.resume)
        if model.arch.input_shape != data.descriptor.shape:
            raise ConfigurationError(
                f"--resume checkpoint expects fields {model.arch.input_shape}, data has {data.descriptor.shape}"
            )
        trace_file = _trace_path(Path(args.resume))
        resume_trace = read_trace(trace_file) if trace_file.exists() else None
        stage.info(f"resuming from {args.resume} after epoch {resume_trace[-1].epoch if resume_trace else 0}")
    else:
        channels, height, width = data.descriptor.shape
        arch = cfg.cae.architecture(channels, height, width, cbam=False if args.no_cbam else None)
        model = build_model(arch, seed=cfg.runtime.seed)

    result = train(model, data.train, train_cfg, weights=data.weights, resume_trace=resume_trace, progress=stage)
    out = save_model(args.out, result.model)
    trace = list(resume_trace or []) + result.trace
    trace_out = write_trace(Path(args.trace) if args.trace else _trace_path(out), trace)
    stage.artifact("checkpoint", out)
    stage.artifact("loss trace", trace_out)

    in_dist = evaluate_loss(result.model, data.train.values, data.weights)
    out_dist = evaluate_loss(result.model, data.test.values, data.weights)
    _print_json({
        "checkpoint": out,
        "trace": trace_out,
        "epochs": [trace[0].epoch, trace[-1].epoch],
        "cbam": result.model.cbam_enabled,
        "train_reconstruction_lw_rmse": in_dist,
        "heldout_reconstruction_lw_rmse": out_dist,
    })


# ===================================================================================
# POD
# ===================================================================================

def _pod_weights(data: PreparedData, cfg: RunConfig):
    return data.weights if cfg.pod.weighted else None


@safe_command_execution("fit-pod")
def cmd_fit_pod(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    k = args.k if args.k is not None else cfg.pod.k
    stage = StageLogger("fit-pod")
    stage.stage_start(f"k={k} method={cfg.pod.method} weighted={cfg.pod.weighted}")
    weights = _pod_weights(data, cfg)
    fw = None if weights is None else feature_weights(weights, data.descriptor.shape)
    basis = fit_pod(data.train.values, k, weights=fw, method=cfg.pod.method)
    out = save_basis(args.out, basis)
    stage.artifact("POD basis", out)
    stage.stage_complete()
    _print_json({
        "basis": out,
        "k": basis.k,
        "compression_ratio": basis.compression_ratio,
        "captured_energy": float(energy_spectrum(basis)[-1]),
    })


@safe_command_execution("pod-sweep")
def cmd_pod_sweep(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    k_list = args.k_list if args.k_list is not None else cfg.pod.k_list
    sweep = pod_sweep(
        data.train.values, k_list, weights=_pod_weights(data, cfg), held_out=data.test.values, method=cfg.pod.method
    )
    out = sweep.write_csv(args.out)
    StageLogger("pod-sweep").artifact("POD sweep", out)
    print(sweep.to_frame().to_string(index=False))


# ===================================================================================
# TABLES
# ===================================================================================

def _heldout_row(name: str, codec: LatentCodec, data: PreparedData, ratio: float) -> CompressionRow:
    recon = denormalize(codec.decode(codec.encode(data.test.values)), data.descriptor)
    test_raw = data.raw.values[len(data.train):]
    errors = lw_rmse_per_variable(test_raw, recon, data.weights)
    return CompressionRow(name, ratio, dict(zip(data.descriptor.variables, errors.tolist())))


@safe_command_execution("compare")
def cmd_compare(args) -> None:
    """Held-out reconstruction LW-RMSE in physical units for each codec."""
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    rows: List[CompressionRow] = []
    for path in args.codec:
        codec = load_codec(path)
        field_dim = int(np.prod(codec.field_shape))
        label = f"{codec.name.upper()} ({Path(path).name}, latent {codec.latent_dim})"
        rows.append(_heldout_row(label, codec, data, field_dim / codec.latent_dim))
    table = compression_table(rows, data.descriptor.variables)
    out = write_table(table, args.out)
    print(table.to_string(index=False))

    if args.trace:
        traces = {}
        for item in args.trace:
            label, _, path = item.partition("=")
            if not path:
                raise ConfigurationError(f"--trace expects LABEL=PATH, got {item!r}")
            traces[label] = read_trace(path)
        ablation_out = write_table(ablation_table(traces), args.ablation_out or out.with_name("ablation.csv"))
        StageLogger("compare").artifact("ablation table", ablation_out)


@safe_command_execution("describe")
def cmd_describe(args) -> None:
    """Architecture, parameter count and compression ratios for desk and published scales."""
    cfg = _run_config(args)
    desk = cfg.cae.architecture(len(DEFAULT_VARIABLES), cfg.grid.height, cfg.grid.width)
    reference = CaeArchitecture(**{**REFERENCE_SCALE_CAE_CONFIG, "stage_channels": tuple(REFERENCE_SCALE_CAE_CONFIG["stage_channels"])})
    rows = reference_rows(desk, pod_modes=desk.latent_dim) + reference_rows(
        reference, quoted_pod_ratio=QUOTED_POD_RATIO
    )
    table = compression_table(rows)[["model", "ratio", "note"]]
    _print_json({"desk": desk.describe(), "reference_scale": reference.describe()})
    print(table.to_string(index=False))
    if args.out:
        write_table(table, args.out)


# ===================================================================================
# REDUCED-ORDER MODEL
# ===================================================================================

@safe_command_execution("fit-rom")
def cmd_fit_rom(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    d = args.d if args.d is not None else cfg.rom.d
    stage = StageLogger("fit-rom")
    codec = load_codec(args.codec)
    stage.stage_start(f"codec={codec.name} n={codec.latent_dim} d={d} ridge={cfg.rom.ridge}")
    rom, budget, residual = fit_codec_operator(
        codec, data.train.values, d, cfg.rom.ridge, data.descriptor.dt_hours
    )
    out = save_operator(args.out, rom)
    stage.artifact("operator", out)
    stage.stage_complete()
    _print_json({
        "operator": out,
        "n": rom.n,
        "d": rom.d,
        **budget.as_dict(),
        "one_step_residual": residual,
        "spectral_radius": rom.spectral_radius(),
    })


def _write_fields(path, fields_n, data: PreparedData, first_index: int) -> Path:
    dt = data.descriptor.dt_hours
    timestamps = data.raw.timestamps[0] + (first_index + np.arange(len(fields_n))) * dt
    seq = SnapshotSequence(data.raw.descriptor, timestamps, denormalize(fields_n, data.descriptor))
    return write_snapshots(path, seq)


@safe_command_execution("forecast")
def cmd_forecast(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    codec, rom = load_codec(args.codec), load_operator(args.operator)
    horizon = args.horizon if args.horizon is not None else cfg.experiment.horizon
    if horizon < 1:
        raise ConfigurationError(f"experiment.horizon must be at least 1, got {horizon}")
    start = args.start
    if not rom.d <= start <= len(data.normalized):
        raise ConfigurationError(f"--start must lie in [d, N] = [{rom.d}, {len(data.normalized)}], got {start}")
    predicted = forecast(codec, rom, data.normalized.values[start - rom.d : start], horizon)
    out = _write_fields(args.out, predicted, data, start)
    StageLogger("forecast").artifact("forecast fields", out)

    summary = {"fields": out, "start": start, "horizon": horizon}
    if args.report:
        with GracefulErrorHandler("forecast report") as guard:
            report = run_experiment(
                "forecast", codec, rom, data.normalized, data.boundary,
                ExperimentConfig(num_starts=1, horizon=horizon, denormalize=cfg.experiment.denormalize),
                starts=[start],
            )
            summary["report"] = report.write_csv(args.report)
        if guard.error is not None:
            summary["report_error"] = str(guard.error)
    _print_json(summary)


def _kinds(kind: str) -> Sequence[str]:
    return EXPERIMENT_KINDS if kind == "all" else (kind,)


@safe_command_execution("experiment")
def cmd_experiment(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    codec, rom = load_codec(args.codec), load_operator(args.operator)
    exp_cfg = cfg.experiment.experiment_config(cfg.runtime.threads)
    if args.horizon is not None:
        exp_cfg = replace(exp_cfg, horizon=args.horizon).validate()
    out_dir = Path(args.out_dir)
    summary = {}
    for kind in _kinds(args.kind):
        report = run_experiment(kind, codec, rom, data.normalized, data.boundary, exp_cfg)
        path = report.write_csv(out_dir / f"{kind}.csv")
        entry = {
            "report": path,
            "lead1_lw_rmse": float(report.mean_curve()[0]),
            "lead1_persistence": float(report.baseline_curve()[0]),
            "mean_lw_rmse": float(report.mean_curve().mean()),
            "floor": float(report.floor.mean()),
        }
        if report.boundary_lead is not None:
            before, after = report.segment_means()
            entry.update({"pre_boundary_mean": before, "post_boundary_mean": after})
        if args.dump_fields:
            with GracefulErrorHandler(f"{kind} field dump"):
                start = report.config["starts"][0]
                fields = forecast(codec, rom, data.normalized.values[start - rom.d : start], exp_cfg.horizon)
                entry["fields"] = _write_fields(out_dir / f"{kind}_fields.romdat", fields, data, start)
        summary[kind] = entry
    _print_json(summary)


@safe_command_execution("delay-sweep")
def cmd_delay_sweep(args) -> None:
    cfg = _run_config(args)
    data = prepare_data(args.data, cfg)
    codec = load_codec(args.codec)
    d_list = args.d_list if args.d_list is not None else cfg.rom.d_list
    sweep = delay_sweep(
        codec, data.normalized, data.boundary, d_list,
        cfg.experiment.experiment_config(cfg.runtime.threads), ridge=cfg.rom.ridge,
    )
    out = sweep.write_csv(args.out)
    StageLogger("delay-sweep").artifact("delay sweep", out)
    print(sweep.to_frame().to_string(index=False))


# ===================================================================================
# PARSER
# ===================================================================================

def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnrom",
        description="Attention-enhanced autoencoder reduced-order modeling of gridded fields",
    )
    parser.add_argument("--config", help="RunConfig file (key = value, [section] headers)")
    parser.add_argument("--seed", type=int, help="Override runtime.seed")
    parser.add_argument("--threads", type=int, help="Override runtime.threads (1 = single-threaded)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Console log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a synthetic ROMDAT1 dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="Manifest CSV (default: manifest.csv next to --out)")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train-cae", help="Train the autoencoder under LW-RMSE")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="ROMCAE1 checkpoint to write")
    p.add_argument("--trace", help="Loss trace CSV (default: <out>.loss.csv)")
    p.add_argument("--no-cbam", action="store_true", help="Disable the attention modules (ablation)")
    p.add_argument("--resume", help="Continue training from this checkpoint and its loss trace")
    p.add_argument("--epochs", type=int, help="Override train.epochs")
    p.set_defaults(handler=cmd_train_cae)

    p = sub.add_parser("fit-pod", help="Fit a POD basis on the training split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="ROMPOD1 basis to write")
    p.add_argument("--k", type=int, help="Override pod.k")
    p.set_defaults(handler=cmd_fit_pod)

    p = sub.add_parser("pod-sweep", help="POD reconstruction error versus mode count")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-list", type=_int_list, help="Override pod.k_list (comma-separated)")
    p.set_defaults(handler=cmd_pod_sweep)

    p = sub.add_parser("compare", help="Compression ratio and held-out LW-RMSE per codec")
    p.add_argument("--data", required=True)
    p.add_argument("--codec", required=True, action="append", help="CAE or POD checkpoint (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="append", help="LABEL=loss.csv for the attention ablation table (repeatable)")
    p.add_argument("--ablation-out", help="Ablation table CSV (default: ablation.csv next to --out)")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("describe", help="Architecture and compression ratios")
    p.add_argument("--out", help="Optional CSV of the ratio table")
    p.set_defaults(handler=cmd_describe)

    p = sub.add_parser("fit-rom", help="Fit the delayed latent operator")
    p.add_argument("--data", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--out", required=True, help="ROMOP1 operator to write")
    p.add_argument("--d", type=int, help="Override rom.d")
    p.set_defaults(handler=cmd_fit_rom)

    p = sub.add_parser("forecast", help="Forecast from one start index and dump decoded fields")
    p.add_argument("--data", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--start", type=int, required=True, help="Index of the first predicted snapshot")
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", required=True, help="ROMDAT1 file of physical-unit predictions")
    p.add_argument("--report", help="Optional report CSV (needs the truth inside the dataset)")
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("experiment", help="In-window, out-of-window and transition experiments")
    p.add_argument("--data", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--operator", required=True)
    p.add_argument("--kind", choices=list(EXPERIMENT_KINDS) + ["all"], default="all")
    p.add_argument("--horizon", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-fields", action="store_true", help="Also write the first start's decoded forecast")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("delay-sweep", help="Mean in-window LW-RMSE for each delay depth")
    p.add_argument("--data", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--d-list", type=_int_list, help="Override rom.d_list (comma-separated)")
    p.set_defaults(handler=cmd_delay_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, configure logging and run one command; returns the exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(
        log_level=args.log_level or os.getenv("LOG_LEVEL", LOGGING_CONFIG["level"]),
        log_to_console=LOGGING_CONFIG["log_to_console"],
        log_to_file=_env_flag("LOG_TO_FILE", LOGGING_CONFIG["log_to_file"]),
        force=True,
    )
    return args.handler(args)
