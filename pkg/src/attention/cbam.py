"""Convolutional Block Attention Module built from graph primitives.

Channel attention gates each channel with
``M_c = σ(MLP(AvgPool(F)) + MLP(MaxPool(F)))`` using ONE perceptron shared by
both pooled branches; spatial attention gates each location with
``M_s = σ(conv7x7([AvgPool_c(F'); MaxPool_c(F')]))``. CBAM applies channel
attention first, then spatial attention.
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..tensor.graph import Graph, Var
from ..tensor.init import glorot_uniform
from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, ShapeError

SPATIAL_KERNEL = 7
SPATIAL_PADDING = 3


@dataclass
class ChannelAttentionParams:
    """Shared two-layer perceptron: w0 [C/r, C], b0 [C/r], w1 [C, C/r], b1 [C]."""
    w0: Tensor
    b0: Tensor
    w1: Tensor
    b1: Tensor
    reduction: int

    @property
    def channels(self) -> int:
        return int(self.w0.shape[1])

    @staticmethod
    def shapes(channels: int, reduction: int) -> Dict[str, Tuple[int, ...]]:
        if reduction < 1 or channels % reduction:
            raise ConfigurationError(
                f"cae.reduction={reduction} must divide the channel count {channels}"
            )
        hidden = channels // reduction
        return {"w0": (hidden, channels), "b0": (hidden,), "w1": (channels, hidden), "b1": (channels,)}

    @classmethod
    def zeros(cls, channels: int, reduction: int) -> "ChannelAttentionParams":
        shapes = cls.shapes(channels, reduction)
        return cls(**{k: np.zeros(s) for k, s in shapes.items()}, reduction=reduction)

    @classmethod
    def initialize(cls, channels: int, reduction: int, rng: np.random.Generator) -> "ChannelAttentionParams":
        shapes = cls.shapes(channels, reduction)
        return cls(
            w0=glorot_uniform(rng, shapes["w0"]),
            b0=np.zeros(shapes["b0"]),
            w1=glorot_uniform(rng, shapes["w1"]),
            b1=np.zeros(shapes["b1"]),
            reduction=reduction,
        )

    def as_dict(self) -> Dict[str, Tensor]:
        return {"w0": self.w0, "b0": self.b0, "w1": self.w1, "b1": self.b1}


@dataclass
class SpatialAttentionParams:
    """One 7×7 kernel [1, 2, 7, 7] mapping (avg, max) planes to one gate plane."""
    kernel: Tensor
    bias: Tensor

    def __post_init__(self):
        if tuple(self.kernel.shape) != (1, 2, SPATIAL_KERNEL, SPATIAL_KERNEL):
            raise ShapeError("spatial_attention", self.kernel.shape, (1, 2, 7, 7), detail="kernel must be 1x2x7x7")
        if tuple(self.bias.shape) != (1,):
            raise ShapeError("spatial_attention", self.bias.shape, (1,), detail="bias must have one entry")

    @staticmethod
    def shapes() -> Dict[str, Tuple[int, ...]]:
        return {"kernel": (1, 2, SPATIAL_KERNEL, SPATIAL_KERNEL), "bias": (1,)}

    @classmethod
    def zeros(cls) -> "SpatialAttentionParams":
        return cls(**{k: np.zeros(s) for k, s in cls.shapes().items()})

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "SpatialAttentionParams":
        return cls(kernel=glorot_uniform(rng, cls.shapes()["kernel"]), bias=np.zeros(1))

    def as_dict(self) -> Dict[str, Tensor]:
        return {"kernel": self.kernel, "bias": self.bias}


# ---------------------------------------------------------------------------
# graph-level layers (used inside the autoencoder)
# ---------------------------------------------------------------------------

def channel_attention_node(g: Graph, f: Var, p: Dict[str, Var]) -> Tuple[Var, Var]:
    """Returns (F', M_c) with M_c of shape [B, C, 1, 1]."""
    batch, channels = f.shape[0], f.shape[1]
    if p["w0"].shape[1] != channels:
        raise ShapeError("channel_attention", f.shape, p["w0"].shape, detail="channel count differs from parameters")

    def shared_mlp(pooled: Var) -> Var:
        flat = g.apply("reshape", pooled, shape=(batch, channels))
        hidden = g.apply("relu", g.apply("linear", flat, p["w0"], p["b0"]))
        return g.apply("linear", hidden, p["w1"], p["b1"])

    avg_branch = shared_mlp(g.apply("global_avg_pool", f))
    max_branch = shared_mlp(g.apply("global_max_pool", f))
    gate = g.apply("sigmoid", g.apply("add", avg_branch, max_branch))
    gate = g.apply("reshape", gate, shape=(batch, channels, 1, 1))
    return g.apply("multiply", gate, f), gate


def spatial_attention_node(g: Graph, f: Var, p: Dict[str, Var]) -> Tuple[Var, Var]:
    """Returns (F'', M_s) with M_s of shape [B, 1, H, W]."""
    pooled = g.apply("concat", g.apply("channel_avg_pool", f), g.apply("channel_max_pool", f))
    logits = g.apply("conv2d", pooled, p["kernel"], p["bias"], stride=1, padding=SPATIAL_PADDING)
    gate = g.apply("sigmoid", logits)
    return g.apply("multiply", gate, f), gate


def cbam_node(g: Graph, f: Var, channel: Dict[str, Var], spatial: Dict[str, Var]) -> Var:
    refined, _ = channel_attention_node(g, f, channel)
    out, _ = spatial_attention_node(g, refined, spatial)
    return out


# ---------------------------------------------------------------------------
# array-level API
# ---------------------------------------------------------------------------

def _as_input(F) -> Tensor:
    x = np.asarray(F, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError("cbam", x.shape, detail="feature map must be [B, C, H, W]")
    return x


def channel_attention_map(F, p: ChannelAttentionParams) -> Tuple[Tensor, Tensor]:
    """(F', M_c) evaluated outside any training graph."""
    g = Graph()
    out, gate = channel_attention_node(g, g.constant(_as_input(F)), {k: g.constant(v) for k, v in p.as_dict().items()})
    return out.value, gate.value


def spatial_attention_map(Fp, p: SpatialAttentionParams) -> Tuple[Tensor, Tensor]:
    """(F'', M_s) evaluated outside any training graph."""
    g = Graph()
    out, gate = spatial_attention_node(g, g.constant(_as_input(Fp)), {k: g.constant(v) for k, v in p.as_dict().items()})
    return out.value, gate.value


def channel_attention(F, p: ChannelAttentionParams) -> Tensor:
    return channel_attention_map(F, p)[0]


def spatial_attention(Fp, p: SpatialAttentionParams) -> Tensor:
    return spatial_attention_map(Fp, p)[0]


def cbam(F, cp: ChannelAttentionParams, sp: SpatialAttentionParams) -> Tensor:
    """Channel attention then spatial attention (never the reverse)."""
    return spatial_attention(channel_attention(F, cp), sp)
