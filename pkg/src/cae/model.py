"""ResNet convolutional autoencoder with optional CBAM.

Encoder:
    pad latitude rows to a multiple of 2^stages
    stem 3×3 conv (C → stem) + ReLU
    per stage: stride-2 3×3 conv (prev → ch_s) + ReLU, ResBlock(ch_s)
    1×1 conv to the latent channel count

Decoder (mirror):
    1×1 conv (latent → ch_last) + ReLU
    per stage, last first: stride-2 transposed conv (ch_s → ch_s) + ReLU,
        ResBlock(ch_s → ch_{s-1} or stem), 1×1 projection on the skip path
    3×3 head conv (stem → C), crop the padded rows

ResBlock: out = ReLU(skip(x) + CBAM(conv2(ReLU(conv1(x))))).

Latent vectors are the channel-major flattening of the [c, h, w] latent.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..attention.cbam import ChannelAttentionParams, SpatialAttentionParams, cbam_node
from ..tensor.graph import Graph, Var
from ..tensor.init import glorot_uniform
from ..tensor.ops import Tensor
from ..tensor.params import ParameterSet, count_parameters
from ..utils.error_handler import ConfigurationError, ShapeError

Shapes = Dict[str, Tuple[int, ...]]


@dataclass(frozen=True)
class CaeArchitecture:
    """Extents and channel schedule; everything else is derived."""
    channels: int = 4
    height: int = 33
    width: int = 48
    stem_channels: int = 16
    stage_channels: Tuple[int, ...] = (16, 32)
    latent_channels: int = 8
    cbam: bool = True
    reduction: int = 4

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        for key in ("channels", "height", "width", "stem_channels", "latent_channels", "reduction"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"cae.{key} must be positive, got {getattr(self, key)}")
        if not self.stage_channels or min(self.stage_channels) < 1:
            raise ConfigurationError(f"cae.stage_channels must list positive channel counts, got {self.stage_channels}")
        if self.width % self.factor:
            raise ConfigurationError(
                f"grid.width={self.width} must be divisible by 2^stages={self.factor} "
                f"(cae.stage_channels has {len(self.stage_channels)} stages)"
            )
        if self.cbam:
            for ch in self.attended_channels:
                if ch % self.reduction:
                    raise ConfigurationError(f"cae.reduction={self.reduction} must divide every block width, not {ch}")

    @property
    def n_stages(self) -> int:
        return len(self.stage_channels)

    @property
    def factor(self) -> int:
        return 2 ** len(self.stage_channels)

    @property
    def padded_height(self) -> int:
        return -(-self.height // self.factor) * self.factor

    @property
    def pad_south(self) -> int:
        """Rows added before row 0 (latitudes run south to north)."""
        total = self.padded_height - self.height
        return total - total // 2

    @property
    def pad_north(self) -> int:
        return (self.padded_height - self.height) // 2

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return self.channels, self.height, self.width

    @property
    def padded_shape(self) -> Tuple[int, int, int]:
        return self.channels, self.padded_height, self.width

    @property
    def latent_shape(self) -> Tuple[int, int, int]:
        return self.latent_channels, self.padded_height // self.factor, self.width // self.factor

    @property
    def latent_dim(self) -> int:
        c, h, w = self.latent_shape
        return c * h * w

    @property
    def compression_ratio(self) -> float:
        """(C·H·W)/(c·h·w) on the unpadded grid."""
        return self.channels * self.height * self.width / self.latent_dim

    @property
    def attended_channels(self) -> Tuple[int, ...]:
        decoder_outputs = (self.stem_channels,) + self.stage_channels[:-1]
        return self.stage_channels + decoder_outputs

    def parameter_shapes(self) -> Shapes:
        """Declaration-ordered parameter shapes, computed without allocating weights."""
        shapes: Shapes = {}
        stem, stages, c = self.stem_channels, self.stage_channels, self.channels

        shapes["enc.stem.w"] = (stem, c, 3, 3)
        shapes["enc.stem.b"] = (stem,)
        prev = stem
        for s, ch in enumerate(stages):
            shapes[f"enc.stage{s}.down.w"] = (ch, prev, 3, 3)
            shapes[f"enc.stage{s}.down.b"] = (ch,)
            shapes.update(ResBlockParams.shapes(f"enc.stage{s}.block", ch, ch, self.cbam, self.reduction))
            prev = ch
        shapes["enc.latent.w"] = (self.latent_channels, prev, 1, 1)
        shapes["enc.latent.b"] = (self.latent_channels,)

        shapes["dec.latent.w"] = (prev, self.latent_channels, 1, 1)
        shapes["dec.latent.b"] = (prev,)
        for s in reversed(range(self.n_stages)):
            ch = stages[s]
            out = stages[s - 1] if s > 0 else stem
            shapes[f"dec.stage{s}.up.w"] = (ch, ch, 3, 3)
            shapes[f"dec.stage{s}.up.b"] = (ch,)
            shapes.update(ResBlockParams.shapes(f"dec.stage{s}.block", ch, out, self.cbam, self.reduction))
        shapes["dec.head.w"] = (c, stem, 3, 3)
        shapes["dec.head.b"] = (c,)
        return shapes

    def parameter_count(self) -> int:
        return count_parameters(self.parameter_shapes())

    def describe(self) -> Dict[str, object]:
        return {
            "input_shape": self.input_shape,
            "padded_shape": self.padded_shape,
            "latent_shape": self.latent_shape,
            "latent_dim": self.latent_dim,
            "compression_ratio": self.compression_ratio,
            "parameter_count": self.parameter_count(),
            "cbam": self.cbam,
        }


@dataclass
class ResBlockParams:
    """Parameters of one residual block.

    The projection pair is present exactly when the block changes the
    channel count, so the skip path always matches the residual path.
    """
    conv1_w: Tensor
    conv1_b: Tensor
    conv2_w: Tensor
    conv2_b: Tensor
    channel_attention: Optional[ChannelAttentionParams] = None
    spatial_attention: Optional[SpatialAttentionParams] = None
    proj_w: Optional[Tensor] = None
    proj_b: Optional[Tensor] = None

    def __post_init__(self):
        cin, cout = self.conv1_w.shape[1], self.conv2_w.shape[0]
        if (cin != cout) != (self.proj_w is not None):
            raise ShapeError(
                "ResBlockParams", (cin,), (cout,), detail="projection required exactly when channels change"
            )

    @staticmethod
    def shapes(prefix: str, cin: int, cout: int, cbam: bool, reduction: int) -> Shapes:
        shapes: Shapes = {
            f"{prefix}.conv1.w": (cout, cin, 3, 3),
            f"{prefix}.conv1.b": (cout,),
            f"{prefix}.conv2.w": (cout, cout, 3, 3),
            f"{prefix}.conv2.b": (cout,),
        }
        if cbam:
            for name, shape in ChannelAttentionParams.shapes(cout, reduction).items():
                shapes[f"{prefix}.cbam.ca.{name}"] = shape
            for name, shape in SpatialAttentionParams.shapes().items():
                shapes[f"{prefix}.cbam.sa.{name}"] = shape
        if cin != cout:
            shapes[f"{prefix}.proj.w"] = (cout, cin, 1, 1)
            shapes[f"{prefix}.proj.b"] = (cout,)
        return shapes

    @classmethod
    def from_params(cls, params: Dict[str, Tensor], prefix: str, reduction: int) -> "ResBlockParams":
        ca = sa = None
        if f"{prefix}.cbam.ca.w0" in params:
            ca = ChannelAttentionParams(
                **{k: params[f"{prefix}.cbam.ca.{k}"] for k in ("w0", "b0", "w1", "b1")}, reduction=reduction
            )
            sa = SpatialAttentionParams(params[f"{prefix}.cbam.sa.kernel"], params[f"{prefix}.cbam.sa.bias"])
        return cls(
            params[f"{prefix}.conv1.w"], params[f"{prefix}.conv1.b"],
            params[f"{prefix}.conv2.w"], params[f"{prefix}.conv2.b"],
            channel_attention=ca, spatial_attention=sa,
            proj_w=params.get(f"{prefix}.proj.w"), proj_b=params.get(f"{prefix}.proj.b"),
        )


def resblock_node(g: Graph, x: Var, p: Dict[str, Var], prefix: str) -> Var:
    residual = g.apply("relu", g.apply("conv2d", x, p[f"{prefix}.conv1.w"], p[f"{prefix}.conv1.b"], padding=1))
    residual = g.apply("conv2d", residual, p[f"{prefix}.conv2.w"], p[f"{prefix}.conv2.b"], padding=1)
    if f"{prefix}.cbam.ca.w0" in p:
        channel = {k: p[f"{prefix}.cbam.ca.{k}"] for k in ("w0", "b0", "w1", "b1")}
        spatial = {k: p[f"{prefix}.cbam.sa.{k}"] for k in ("kernel", "bias")}
        residual = cbam_node(g, residual, channel, spatial)
    skip = x
    if f"{prefix}.proj.w" in p:
        skip = g.apply("conv2d", x, p[f"{prefix}.proj.w"], p[f"{prefix}.proj.b"])
    return g.apply("relu", g.apply("add", skip, residual))


def initialize_parameters(arch: CaeArchitecture, seed: int = 0, init: str = "glorot") -> ParameterSet:
    """Glorot-uniform weights and zero biases (``init="zeros"`` zeroes everything)."""
    shapes = arch.parameter_shapes()
    if init == "zeros":
        return ParameterSet.zeros(shapes)
    if init != "glorot":
        raise ConfigurationError(f"cae.init must be 'glorot' or 'zeros', got {init!r}")
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    for name, shape in shapes.items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            params[name] = glorot_uniform(rng, shape, transposed=".up." in name)
    return params


@dataclass
class CaeModel:
    """Architecture plus parameters; parameters are replaced, never mutated, by training."""
    arch: CaeArchitecture
    params: ParameterSet = field(repr=False)

    def __post_init__(self):
        expected = self.arch.parameter_shapes()
        if list(expected) != list(self.params):
            raise ShapeError("CaeModel", (len(expected),), (len(self.params),), detail="parameter names differ")
        for name, shape in expected.items():
            if tuple(self.params[name].shape) != shape:
                raise ShapeError("CaeModel", shape, self.params[name].shape, detail=name)

    @classmethod
    def build(cls, arch: CaeArchitecture, seed: int = 0, init: str = "glorot") -> "CaeModel":
        return cls(arch, initialize_parameters(arch, seed, init))

    def with_params(self, params: Dict[str, Tensor]) -> "CaeModel":
        return CaeModel(self.arch, ParameterSet(params))

    @property
    def cbam_enabled(self) -> bool:
        return self.arch.cbam

    @property
    def latent_shape(self) -> Tuple[int, int, int]:
        return self.arch.latent_shape

    @property
    def latent_dim(self) -> int:
        return self.arch.latent_dim

    def resblock(self, prefix: str) -> ResBlockParams:
        return ResBlockParams.from_params(self.params, prefix, self.arch.reduction)

    # -- graph builders ------------------------------------------------------

    def encoder_node(self, g: Graph, x: Var, p: Dict[str, Var]) -> Var:
        a = self.arch
        if tuple(x.shape[1:]) != a.input_shape:
            raise ShapeError("encode", x.shape, (x.shape[0],) + a.input_shape)
        h = g.apply("pad2d", x, top=a.pad_south, bottom=a.pad_north)
        h = g.apply("relu", g.apply("conv2d", h, p["enc.stem.w"], p["enc.stem.b"], padding=1))
        for s in range(a.n_stages):
            h = g.apply("conv2d", h, p[f"enc.stage{s}.down.w"], p[f"enc.stage{s}.down.b"], stride=2, padding=1)
            h = resblock_node(g, g.apply("relu", h), p, f"enc.stage{s}.block")
        return g.apply("conv2d", h, p["enc.latent.w"], p["enc.latent.b"])

    def decoder_node(self, g: Graph, z: Var, p: Dict[str, Var]) -> Var:
        a = self.arch
        if tuple(z.shape[1:]) != a.latent_shape:
            raise ShapeError("decode", z.shape, (z.shape[0],) + a.latent_shape)
        h = g.apply("relu", g.apply("conv2d", z, p["dec.latent.w"], p["dec.latent.b"]))
        for s in reversed(range(a.n_stages)):
            h = g.apply(
                "conv2d_transpose", h, p[f"dec.stage{s}.up.w"], p[f"dec.stage{s}.up.b"],
                stride=2, padding=1, output_padding=1,
            )
            h = resblock_node(g, g.apply("relu", h), p, f"dec.stage{s}.block")
        out = g.apply("conv2d", h, p["dec.head.w"], p["dec.head.b"], padding=1)
        return g.apply("crop2d", out, top=a.pad_south, bottom=a.pad_north)

    def reconstruct_node(self, g: Graph, x: Var, p: Dict[str, Var]) -> Var:
        return self.decoder_node(g, self.encoder_node(g, x, p), p)

    # -- array API ------------------------------------------------------------

    def _constants(self, g: Graph) -> Dict[str, Var]:
        return {name: g.constant(value) for name, value in self.params.items()}

    def encode(self, X) -> Tensor:
        g = Graph()
        return np.array(self.encoder_node(g, g.constant(_batch(X, "encode")), self._constants(g)).value)

    def decode(self, z) -> Tensor:
        g = Graph()
        return np.array(self.decoder_node(g, g.constant(_batch(z, "decode")), self._constants(g)).value)

    def reconstruct(self, X) -> Tensor:
        return self.decode(self.encode(X))


def _batch(x, op: str) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(op, x.shape, detail="expected a [B, C, H, W] batch")
    return x


def build_model(arch: CaeArchitecture, seed: int = 0, init: str = "glorot") -> CaeModel:
    return CaeModel.build(arch, seed, init)


def encode(model: CaeModel, X) -> Tensor:
    """[B, C, H, W] fields → [B, c, h, w] latents."""
    return model.encode(X)


def decode(model: CaeModel, z) -> Tensor:
    """[B, c, h, w] latents → [B, C, H, W] fields."""
    return model.decode(z)


def encode_batched(model: CaeModel, X, batch_size: int = 64) -> Tensor:
    X = _batch(X, "encode")
    if len(X) == 0:
        return np.zeros((0,) + model.latent_shape)
    return np.concatenate([model.encode(X[i:i + batch_size]) for i in range(0, len(X), batch_size)])


def decode_batched(model: CaeModel, z, batch_size: int = 64) -> Tensor:
    z = _batch(z, "decode")
    if len(z) == 0:
        return np.zeros((0,) + model.arch.input_shape)
    return np.concatenate([model.decode(z[i:i + batch_size]) for i in range(0, len(z), batch_size)])
