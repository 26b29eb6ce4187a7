"""Report containers and CSV tables.

Experiment report CSV: variable, lead_steps, lw_rmse, baseline_lw_rmse, floor
Delay-sweep CSV:       d, lw_rmse
Compression table:     model, ratio, <one column per variable>, note
Ablation table:        label, epoch, train_loss, val_loss, lr
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..cae.model import CaeArchitecture
from ..cae.trainer import EpochRecord
from ..tensor.ops import Tensor
from ..utils.error_handler import FormatError, ShapeError

PathLike = Union[str, Path]

REPORT_COLUMNS = ["variable", "lead_steps", "lw_rmse", "baseline_lw_rmse", "floor"]
SWEEP_COLUMNS = ["d", "lw_rmse"]
ABLATION_COLUMNS = ["label", "epoch", "train_loss", "val_loss", "lr"]
FLOAT_FORMAT = "%.17g"

REFERENCE_POD_MODES = 1000


def _write(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def _read(path: PathLike, columns: List[str]) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns[: len(columns)]) != columns:
        raise FormatError(f"{path} must start with columns {columns}, found {list(frame.columns)}")
    return frame


@dataclass
class ForecastReport:
    """Per-lead, per-variable LW-RMSE averaged over forecast starts."""
    kind: str
    variables: Tuple[str, ...]
    lw_rmse: Tensor
    baseline: Tensor
    floor: Tensor
    per_start: Optional[Tensor] = field(default=None, repr=False)
    config: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        horizon, channels = self.lw_rmse.shape
        if self.baseline.shape != (horizon, channels) or self.floor.shape != (channels,):
            raise ShapeError("ForecastReport", self.lw_rmse.shape, self.baseline.shape, self.floor.shape)
        if channels != len(self.variables):
            raise ShapeError("ForecastReport", (channels,), (len(self.variables),), detail="one column per variable")
        if np.any(self.lw_rmse < 0) or np.any(self.baseline < 0) or np.any(self.floor < 0):
            raise ShapeError("ForecastReport", self.lw_rmse.shape, detail="errors must be non-negative")

    @property
    def horizon(self) -> int:
        return self.lw_rmse.shape[0]

    @property
    def boundary_lead(self) -> Optional[int]:
        value = self.config.get("boundary_lead")
        return None if value is None else int(value)

    def mean_curve(self) -> Tensor:
        """Variable-averaged LW-RMSE per lead, shape [horizon]."""
        return self.lw_rmse.mean(axis=1)

    def baseline_curve(self) -> Tensor:
        return self.baseline.mean(axis=1)

    def segment_means(self, boundary_lead: Optional[int] = None) -> Tuple[float, float]:
        """(mean over leads 1..b, mean over leads b+1..horizon) of the mean curve."""
        b = self.boundary_lead if boundary_lead is None else boundary_lead
        if b is None or not 1 <= b < self.horizon:
            raise ShapeError("segment_means", (b,), (self.horizon,), detail="boundary lead must split the horizon")
        curve = self.mean_curve()
        return float(curve[:b].mean()), float(curve[b:].mean())

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for c, variable in enumerate(self.variables):
            for lead in range(self.horizon):
                rows.append({
                    "variable": variable,
                    "lead_steps": lead + 1,
                    "lw_rmse": self.lw_rmse[lead, c],
                    "baseline_lw_rmse": self.baseline[lead, c],
                    "floor": self.floor[c],
                })
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)

    def write_csv(self, path: PathLike) -> Path:
        path = _write(self.to_frame(), path)
        meta = {"kind": self.kind, "variables": list(self.variables), **self.config}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=str))
        return path

    @classmethod
    def read_csv(cls, path: PathLike, kind: Optional[str] = None) -> "ForecastReport":
        frame = _read(path, REPORT_COLUMNS)
        variables = tuple(dict.fromkeys(frame["variable"].astype(str)))
        horizon = int(frame["lead_steps"].max())
        lw = np.zeros((horizon, len(variables)))
        base = np.zeros_like(lw)
        floor = np.zeros(len(variables))
        seen = np.zeros_like(lw, dtype=bool)
        index = {v: i for i, v in enumerate(variables)}
        for row in frame.to_dict("records"):
            c, lead = index[str(row["variable"])], int(row["lead_steps"]) - 1
            lw[lead, c] = row["lw_rmse"]
            base[lead, c] = row["baseline_lw_rmse"]
            floor[c] = row["floor"]
            seen[lead, c] = True
        if not seen.all():
            raise FormatError(f"report {path} is missing (variable, lead) cells")
        config: Dict[str, object] = {}
        meta_path = Path(path).with_suffix(".json")
        if meta_path.exists():
            config = json.loads(meta_path.read_text())
            kind = kind or config.pop("kind", None)
            config.pop("variables", None)
        return cls(kind or "unknown", variables, lw, base, floor, config=config)


def mean_over_starts(per_start: Tensor) -> Tensor:
    """Arithmetic mean over the leading (start) axis."""
    return np.asarray(per_start, dtype=np.float64).mean(axis=0)


@dataclass
class DelaySweep:
    d: List[int]
    lw_rmse: List[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"d": self.d, "lw_rmse": self.lw_rmse}, columns=SWEEP_COLUMNS)

    def write_csv(self, path: PathLike) -> Path:
        return _write(self.to_frame(), path)

    @classmethod
    def read_csv(cls, path: PathLike) -> "DelaySweep":
        frame = _read(path, SWEEP_COLUMNS)
        return cls([int(v) for v in frame["d"]], [float(v) for v in frame["lw_rmse"]])


@dataclass
class CompressionRow:
    model: str
    ratio: float
    per_variable: Mapping[str, float] = field(default_factory=dict)
    note: str = ""


def pod_ratio_note(field_dim: int, modes: int, quoted_ratio: Optional[float] = None) -> str:
    exact = field_dim / modes
    if quoted_ratio is None or abs(exact - quoted_ratio) < 0.005:
        return ""
    return f"exact ratio {exact:.2f}:1 ({field_dim}/{modes}); the published table rounds it to {quoted_ratio:g}:1"


def reference_rows(
    arch: CaeArchitecture, pod_modes: int = REFERENCE_POD_MODES, quoted_pod_ratio: Optional[float] = None
) -> List[CompressionRow]:
    """Compression ratios of a CAE architecture and a POD basis on the same grid (no error values)."""
    field_dim = arch.channels * arch.height * arch.width
    c, h, w = arch.latent_shape
    return [
        CompressionRow(f"CAE ({arch.channels}x{arch.height}x{arch.width}, latent {c}x{h}x{w})", arch.compression_ratio),
        CompressionRow(
            f"POD ({pod_modes} modes)",
            field_dim / pod_modes,
            note=pod_ratio_note(field_dim, pod_modes, quoted_pod_ratio),
        ),
    ]


def compression_table(rows: Sequence[CompressionRow], variables: Sequence[str] = ()) -> pd.DataFrame:
    """Model, ratio, per-variable LW-RMSE (NaN where not measured) and note."""
    names = list(variables) or list(dict.fromkeys(v for r in rows for v in r.per_variable))
    records = []
    for r in rows:
        record = {"model": r.model, "ratio": r.ratio}
        record.update({v: float(r.per_variable.get(v, np.nan)) for v in names})
        record["note"] = r.note
        records.append(record)
    return pd.DataFrame(records, columns=["model", "ratio", *names, "note"])


def ablation_table(traces: Mapping[str, Sequence[EpochRecord]]) -> pd.DataFrame:
    """Stack labelled loss traces (e.g. "cbam" / "no_cbam") into one long table."""
    records = [{"label": label, **asdict(r)} for label, trace in traces.items() for r in trace]
    return pd.DataFrame(records, columns=ABLATION_COLUMNS)


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    return _write(frame, path)
