"""Mini-batch Adam training of the autoencoder under LW-RMSE."""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from ..data.grid import LatitudeWeights
from ..tensor.graph import Graph
from ..tensor.optim import AdamState, adam_step
from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, DataError, FormatError, NumericalError
from ..utils.logger import StageLogger
from .loss import lw_rmse, lw_rmse_node
from .model import CaeModel, decode_batched, encode_batched

TRACE_COLUMNS = ["epoch", "train_loss", "val_loss", "lr"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    patience: int = 5
    decay_factor: float = 0.5
    min_lr: float = 1e-6
    val_fraction: float = 0.1
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.learning_rate < 0:
            raise ConfigurationError(f"train.learning_rate must be non-negative, got {self.learning_rate}")
        for key in ("batch_size", "epochs", "patience"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"train.{key} must be positive, got {getattr(self, key)}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigurationError(f"train.decay_factor must lie in (0, 1), got {self.decay_factor}")
        if self.min_lr < 0:
            raise ConfigurationError(f"train.min_lr must be non-negative, got {self.min_lr}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigurationError(f"train.val_fraction must lie in [0, 1), got {self.val_fraction}")
        return self


@dataclass
class ReduceLROnPlateau:
    """Multiply the rate by ``factor`` after ``patience`` epochs without improvement."""
    lr: float
    patience: int = 5
    factor: float = 0.5
    min_lr: float = 1e-6
    best: float = float("inf")
    bad_epochs: int = 0

    def step(self, metric: float) -> float:
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
            return self.lr
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience and self.lr > self.min_lr:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.bad_epochs = 0
        return self.lr


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainResult:
    model: CaeModel
    trace: List[EpochRecord]
    optimizer: AdamState = field(repr=False)
    scheduler: ReduceLROnPlateau = field(repr=False)

    def trace_frame(self) -> pd.DataFrame:
        return trace_to_frame(self.trace)

    def write_trace(self, path: Union[str, Path]) -> Path:
        return write_trace(path, self.trace)


def trace_to_frame(trace: List[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in trace], columns=TRACE_COLUMNS)


def write_trace(path: Union[str, Path], trace: List[EpochRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_to_frame(trace).to_csv(path, index=False, float_format="%.17g")
    return path


def read_trace(path: Union[str, Path]) -> List[EpochRecord]:
    frame = pd.read_csv(path)
    if list(frame.columns) != TRACE_COLUMNS:
        raise FormatError(f"loss trace {path} must have columns {TRACE_COLUMNS}, found {list(frame.columns)}")
    return [
        EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"]), float(r["lr"]))
        for r in frame.to_dict("records")
    ]


def _validation_split(data: Tensor, fraction: float):
    if fraction == 0.0 or len(data) < 2:
        return data, data
    n_val = max(1, int(round(len(data) * fraction)))
    if n_val >= len(data):
        n_val = len(data) - 1
    return data[:-n_val], data[-n_val:]


def evaluate_loss(model: CaeModel, data: Tensor, weights: LatitudeWeights, batch_size: int = 64) -> float:
    """LW-RMSE of decode(encode(x)) against x over a whole dataset."""
    reconstruction = decode_batched(model, encode_batched(model, data, batch_size), batch_size)
    return lw_rmse(data, reconstruction, weights)


def train(
    model: CaeModel,
    dataset,
    cfg: TrainConfig,
    weights: Optional[LatitudeWeights] = None,
    validation: Optional[Tensor] = None,
    resume_trace: Optional[List[EpochRecord]] = None,
    progress: Optional[StageLogger] = None,
) -> TrainResult:
    """Train ``model`` on normalized [N, C, H, W] data.

    Args:
        model: Initial model (left untouched; the result holds a new one)
        dataset: Normalized fields, array or SnapshotSequence
        cfg: Optimizer and schedule settings
        weights: Latitude weights (uniform when omitted)
        validation: Held-out fields; when omitted the final ``val_fraction``
            of ``dataset`` is used (a single sample validates on itself)
        resume_trace: Trace of an earlier run; numbering continues after its
            last epoch and the learning rate resumes from its last row
        progress: Stage logger receiving one line per epoch

    Returns:
        TrainResult with the trained model and the per-epoch trace
    """
    cfg.validate()
    data = np.asarray(getattr(dataset, "values", dataset), dtype=np.float64)
    if data.ndim != 4 or len(data) == 0:
        raise DataError(f"training needs a non-empty [N, C, H, W] dataset, got shape {data.shape}")
    if weights is None:
        weights = LatitudeWeights.uniform(data.shape[2])
    progress = progress or StageLogger("train-cae")

    if validation is None:
        train_data, val_data = _validation_split(data, cfg.val_fraction)
    else:
        train_data, val_data = data, np.asarray(validation, dtype=np.float64)

    start_epoch = 0
    learning_rate = cfg.learning_rate
    if resume_trace:
        start_epoch = resume_trace[-1].epoch
        learning_rate = resume_trace[-1].lr

    params = model.params.copy()
    optimizer = AdamState.for_params(params, learning_rate=learning_rate)
    scheduler = ReduceLROnPlateau(learning_rate, cfg.patience, cfg.decay_factor, cfg.min_lr)
    rng = np.random.default_rng(cfg.seed)
    trace: List[EpochRecord] = []

    progress.stage_start(
        f"{len(train_data)} training / {len(val_data)} validation samples, "
        f"{model.arch.parameter_count()} parameters, cbam={model.cbam_enabled}"
    )
    for epoch in range(start_epoch + 1, start_epoch + cfg.epochs + 1):
        lr = scheduler.lr
        order = rng.permutation(len(train_data))
        batch_losses = []
        for batch_index, begin in enumerate(range(0, len(order), cfg.batch_size)):
            batch = train_data[order[begin:begin + cfg.batch_size]]
            g = Graph()
            p = g.params(params)
            x = g.constant(batch)
            loss = lw_rmse_node(g, model.reconstruct_node(g, x, p), x, weights)
            value = float(loss.value.reshape(()))
            if not np.isfinite(value):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {batch_index}", stage="train-cae")
            grads = g.backward(loss)
            params, optimizer = adam_step(params, grads, optimizer, learning_rate=lr)
            batch_losses.append(value)

        current = model.with_params(params)
        val_loss = evaluate_loss(current, val_data, weights, cfg.batch_size)
        if not np.isfinite(val_loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}", stage="train-cae")
        record = EpochRecord(epoch, float(np.mean(batch_losses)), val_loss, lr)
        trace.append(record)
        progress.epoch(record.epoch, record.train_loss, record.val_loss, record.lr)
        if scheduler.step(val_loss) < lr:
            progress.info(f"validation loss plateaued; learning rate {lr:.3e} -> {scheduler.lr:.3e}")

    progress.stage_complete(f"final train_loss={trace[-1].train_loss:.6e}")
    return TrainResult(model.with_params(params), trace, optimizer, scheduler)
