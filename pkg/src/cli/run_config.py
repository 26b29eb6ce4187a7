"""RunConfig: `key = value` files with `[section]` headers.

Example (config/desk.ini):

    [grid]
    steps = 2000

    [cae]
    stage_channels = 16, 32

    [rom]
    d = 8

Every section is validated by a pydantic model that forbids unknown keys;
omitted keys take their values from config/default_config.py.
"""
import configparser
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.default_config import (
    CAE_CONFIG,
    EXPERIMENT_CONFIG,
    GRID_CONFIG,
    POD_CONFIG,
    ROM_CONFIG,
    RUNTIME_CONFIG,
    TRAIN_CONFIG,
)

from ..cae.model import CaeArchitecture
from ..cae.trainer import TrainConfig
from ..data.synthetic import SynthConfig
from ..evaluation.experiments import ExperimentConfig
from ..utils.error_handler import ConfigurationError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("*", mode="before")
    @classmethod
    def _split_lists(cls, value, info):
        annotation = cls.model_fields[info.field_name].annotation
        if isinstance(value, str) and getattr(annotation, "__origin__", None) is list:
            return [item.strip() for item in value.split(",") if item.strip()]
        return value


class GridSection(_Section):
    """Synthetic grid extents and generator knobs."""
    height: int = Field(default=GRID_CONFIG["height"], ge=1)
    width: int = Field(default=GRID_CONFIG["width"], ge=1)
    steps: int = Field(default=GRID_CONFIG["steps"], ge=1)
    dt_hours: float = Field(default=GRID_CONFIG["dt_hours"], gt=0)
    t0_hours: float = GRID_CONFIG["t0_hours"]
    n_waves: int = GRID_CONFIG["n_waves"]
    n_noise: int = Field(default=GRID_CONFIG["n_noise"], ge=0)
    noise_amplitude: float = Field(default=GRID_CONFIG["noise_amplitude"], ge=0)
    season_period_hours: float = Field(default=GRID_CONFIG["season_period_hours"], gt=0)
    season_amplitude: float = Field(default=GRID_CONFIG["season_amplitude"], ge=0)
    holdout_fraction: float = Field(default=GRID_CONFIG["holdout_fraction"], gt=0, lt=1)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(**self.model_dump(exclude={"holdout_fraction"})).validate()


class CaeSection(_Section):
    """Autoencoder channel schedule; grid extents come from the data."""
    stem_channels: int = Field(default=CAE_CONFIG["stem_channels"], ge=1)
    stage_channels: List[int] = Field(default=CAE_CONFIG["stage_channels"], min_length=1)
    latent_channels: int = Field(default=CAE_CONFIG["latent_channels"], ge=1)
    cbam: bool = CAE_CONFIG["cbam"]
    reduction: int = Field(default=CAE_CONFIG["reduction"], ge=1)

    def architecture(self, channels: int, height: int, width: int, cbam: Optional[bool] = None) -> CaeArchitecture:
        return CaeArchitecture(
            channels=channels,
            height=height,
            width=width,
            stem_channels=self.stem_channels,
            stage_channels=tuple(self.stage_channels),
            latent_channels=self.latent_channels,
            cbam=self.cbam if cbam is None else cbam,
            reduction=self.reduction,
        )


class TrainSection(_Section):
    learning_rate: float = Field(default=TRAIN_CONFIG["learning_rate"], ge=0)
    batch_size: int = Field(default=TRAIN_CONFIG["batch_size"], ge=1)
    epochs: int = Field(default=TRAIN_CONFIG["epochs"], ge=1)
    patience: int = Field(default=TRAIN_CONFIG["patience"], ge=1)
    decay_factor: float = Field(default=TRAIN_CONFIG["decay_factor"], gt=0, lt=1)
    min_lr: float = Field(default=TRAIN_CONFIG["min_lr"], ge=0)
    val_fraction: float = Field(default=TRAIN_CONFIG["val_fraction"], ge=0, lt=1)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(**self.model_dump(), seed=seed).validate()


class PodSection(_Section):
    k: int = Field(default=POD_CONFIG["k"], ge=1)
    k_list: List[int] = Field(default=POD_CONFIG["k_list"], min_length=1)
    method: Literal["lapack", "jacobi"] = POD_CONFIG["method"]
    weighted: bool = POD_CONFIG["weighted"]


class RomSection(_Section):
    d: int = Field(default=ROM_CONFIG["d"], ge=1)
    d_list: List[int] = Field(default=ROM_CONFIG["d_list"], min_length=1)
    ridge: float = Field(default=ROM_CONFIG["ridge"], ge=0)


class ExperimentSection(_Section):
    num_starts: int = Field(default=EXPERIMENT_CONFIG["num_starts"], ge=1)
    spacing: int = Field(default=EXPERIMENT_CONFIG["spacing"], ge=1)
    horizon: int = Field(default=EXPERIMENT_CONFIG["horizon"], ge=1)
    denormalize: bool = EXPERIMENT_CONFIG["denormalize"]

    def experiment_config(self, threads: int) -> ExperimentConfig:
        return ExperimentConfig(threads=threads, **self.model_dump()).validate()


class RuntimeSection(_Section):
    seed: int = Field(default=RUNTIME_CONFIG["seed"], ge=0)
    threads: int = Field(default=RUNTIME_CONFIG["threads"], ge=1)


class RunConfig(_Section):
    """Validated configuration for every command."""
    grid: GridSection = GridSection()
    cae: CaeSection = CaeSection()
    train: TrainSection = TrainSection()
    pod: PodSection = PodSection()
    rom: RomSection = RomSection()
    experiment: ExperimentSection = ExperimentSection()
    runtime: RuntimeSection = RuntimeSection()

    def with_overrides(self, seed: Optional[int] = None, threads: Optional[int] = None) -> "RunConfig":
        """Apply --seed / --threads command-line overrides."""
        runtime = self.runtime.model_dump()
        if seed is not None:
            runtime["seed"] = seed
        if threads is not None:
            runtime["threads"] = threads
        return _validated({**self.model_dump(), "runtime": runtime})


SECTIONS = tuple(RunConfig.model_fields)


def _validated(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(f"{key}: {first['msg']}", stage="config", original_error=e) from e


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse RunConfig text; unknown sections or keys raise ConfigurationError."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(
            f"{source} is not a valid RunConfig file: {e}", stage="config", original_error=e
        ) from e
    unknown = [name for name in parser.sections() if name not in SECTIONS]
    if unknown:
        raise ConfigurationError(f"{unknown[0]}: unknown section (expected one of {', '.join(SECTIONS)})", stage="config")
    return _validated({name: dict(parser.items(name)) for name in parser.sections()})


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read a RunConfig file; defaults only when ``path`` is None."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist", stage="config")
    return parse_run_config(path.read_text(), source=str(path))
