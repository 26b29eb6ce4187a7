"""Forecast metrics, experiments and report tables."""
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    boundary_index,
    delay_sweep,
    experiment_starts,
    run_experiment,
)
from .metrics import lead_errors, persistence_baseline, reconstruction_floor
from .report import (
    ABLATION_COLUMNS,
    REPORT_COLUMNS,
    SWEEP_COLUMNS,
    CompressionRow,
    DelaySweep,
    ForecastReport,
    ablation_table,
    compression_table,
    mean_over_starts,
    pod_ratio_note,
    reference_rows,
    write_table,
)

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "boundary_index",
    "delay_sweep",
    "experiment_starts",
    "run_experiment",
    "lead_errors",
    "persistence_baseline",
    "reconstruction_floor",
    "ABLATION_COLUMNS",
    "REPORT_COLUMNS",
    "SWEEP_COLUMNS",
    "CompressionRow",
    "DelaySweep",
    "ForecastReport",
    "ablation_table",
    "compression_table",
    "mean_over_starts",
    "pod_ratio_note",
    "reference_rows",
    "write_table",
]
