"""Delay-embedded linear reduced-order model."""
from .checkpoint import OP_MAGIC, load_operator, save_operator
from .delay import LatentSequence, build_delay_matrices, delay_vector
from .forecast import (
    CaeCodec,
    IdentityCodec,
    LatentCodec,
    PodCodec,
    encode_sequence,
    fit_codec_operator,
    forecast,
    load_codec,
)
from .operator import DelayRom, EquationBudget, equation_budget, fit_operator, one_step_residual, rollout

__all__ = [
    "OP_MAGIC",
    "load_operator",
    "save_operator",
    "LatentSequence",
    "build_delay_matrices",
    "delay_vector",
    "CaeCodec",
    "IdentityCodec",
    "LatentCodec",
    "PodCodec",
    "encode_sequence",
    "fit_codec_operator",
    "forecast",
    "load_codec",
    "DelayRom",
    "EquationBudget",
    "equation_budget",
    "fit_operator",
    "one_step_residual",
    "rollout",
]
