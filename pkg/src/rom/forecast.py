"""Encode → evolve → decode forecasts through interchangeable latent codecs."""
from pathlib import Path
from typing import Protocol, Tuple, Union, runtime_checkable

import numpy as np

from ..cae.checkpoint import CAE_MAGIC, load_model
from ..cae.model import CaeModel, decode_batched, encode_batched
from ..pod.basis import PodBasis, pod_project, pod_reconstruct
from ..pod.checkpoint import POD_MAGIC, load_basis
from ..tensor.ops import Tensor
from ..utils.binary_io import read_magic
from ..utils.error_handler import FormatError, ShapeError
from .delay import LatentSequence, build_delay_matrices
from .operator import DelayRom, equation_budget, fit_operator, one_step_residual, rollout


@runtime_checkable
class LatentCodec(Protocol):
    """Maps [B, C, H, W] fields to [B, n] latent vectors and back."""

    name: str

    @property
    def latent_dim(self) -> int: ...

    @property
    def field_shape(self) -> Tuple[int, int, int]: ...

    def encode(self, fields: Tensor) -> Tensor: ...

    def decode(self, latents: Tensor) -> Tensor: ...


def _fields(x, shape: Tuple[int, int, int], op: str) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(shape):
        raise ShapeError(op, x.shape, (x.shape[0] if x.ndim else 0,) + tuple(shape))
    return x


def _latents(z, n: int, op: str) -> Tensor:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != n:
        raise ShapeError(op, z.shape, (z.shape[0] if z.ndim else 0, n))
    return z


class CaeCodec:
    name = "cae"

    def __init__(self, model: CaeModel, batch_size: int = 64):
        self.model = model
        self.batch_size = batch_size

    @property
    def latent_dim(self) -> int:
        return self.model.latent_dim

    @property
    def field_shape(self) -> Tuple[int, int, int]:
        return self.model.arch.input_shape

    def encode(self, fields: Tensor) -> Tensor:
        x = _fields(fields, self.field_shape, "CaeCodec.encode")
        return encode_batched(self.model, x, self.batch_size).reshape(len(x), -1)

    def decode(self, latents: Tensor) -> Tensor:
        z = _latents(latents, self.latent_dim, "CaeCodec.decode")
        return decode_batched(self.model, z.reshape((len(z),) + self.model.latent_shape), self.batch_size)


class PodCodec:
    name = "pod"

    def __init__(self, basis: PodBasis):
        self.basis = basis

    @property
    def latent_dim(self) -> int:
        return self.basis.k

    @property
    def field_shape(self) -> Tuple[int, int, int]:
        return self.basis.field_shape

    def encode(self, fields: Tensor) -> Tensor:
        x = _fields(fields, self.field_shape, "PodCodec.encode")
        return np.atleast_2d(pod_project(self.basis, x.reshape(len(x), -1))).reshape(len(x), -1)

    def decode(self, latents: Tensor) -> Tensor:
        z = _latents(latents, self.latent_dim, "PodCodec.decode")
        return np.atleast_2d(pod_reconstruct(self.basis, z)).reshape((len(z),) + self.field_shape)


class IdentityCodec:
    """Latents are the flattened fields themselves (lossless)."""

    name = "identity"

    def __init__(self, field_shape: Tuple[int, int, int]):
        self._shape = tuple(int(s) for s in field_shape)

    @property
    def latent_dim(self) -> int:
        return int(np.prod(self._shape))

    @property
    def field_shape(self) -> Tuple[int, int, int]:
        return self._shape

    def encode(self, fields: Tensor) -> Tensor:
        x = _fields(fields, self.field_shape, "IdentityCodec.encode")
        return x.reshape(len(x), -1).copy()

    def decode(self, latents: Tensor) -> Tensor:
        z = _latents(latents, self.latent_dim, "IdentityCodec.decode")
        return z.reshape((len(z),) + self.field_shape).copy()


def encode_sequence(codec: LatentCodec, fields, dt: float = 6.0, t0: float = 0.0) -> LatentSequence:
    return LatentSequence(codec.encode(getattr(fields, "values", fields)), dt, t0)


def forecast(codec: LatentCodec, rom: DelayRom, initial_fields, T: int) -> Tensor:
    """Forecast T snapshots from the d most recent fields.

    Args:
        codec: Encoder/decoder pair
        rom: Fitted delayed operator with rom.n == codec.latent_dim
        initial_fields: [d, C, H, W] snapshots, oldest first
        T: Horizon in steps

    Returns:
        [T, C, H, W] decoded predictions for steps 1..T after the newest field
    """
    if codec.latent_dim != rom.n:
        raise ShapeError("forecast", (codec.latent_dim,), (rom.n,), detail="codec latent size differs from operator n")
    fields = _fields(initial_fields, codec.field_shape, "forecast")
    if len(fields) != rom.d:
        raise ShapeError("forecast", fields.shape, (rom.d,) + codec.field_shape, detail="need exactly d initial fields")
    predicted = rollout(rom, codec.encode(fields), T)
    if T == 0:
        return np.zeros((0,) + tuple(codec.field_shape))
    return codec.decode(predicted)


def load_codec(path: Union[str, Path]) -> LatentCodec:
    """Open a CAE or POD checkpoint, dispatching on its magic string."""
    magic = read_magic(path)
    if magic == CAE_MAGIC:
        return CaeCodec(load_model(path))
    if magic == POD_MAGIC:
        return PodCodec(load_basis(path))
    raise FormatError(f"{path} is neither a ROMCAE1 nor a ROMPOD1 checkpoint (magic {magic!r})")


def fit_codec_operator(codec: LatentCodec, fields, d: int, ridge: float = 0.0, dt: float = 6.0):
    """Encode training fields, embed with depth ``d`` and fit the operator.

    Returns:
        (DelayRom, EquationBudget, relative one-step training residual)
    """
    latents = encode_sequence(codec, fields, dt)
    z_td, z_future = build_delay_matrices(latents, d)
    budget = equation_budget(latents.n, d, len(latents))
    rom = fit_operator(z_td, z_future, ridge)
    return rom, budget, one_step_residual(rom, z_td, z_future)
