"""Convolutional autoencoder: architecture, LW-RMSE loss, training and checkpoints."""
from .checkpoint import CAE_MAGIC, load_model, save_model
from .loss import lw_rmse, lw_rmse_node, lw_rmse_per_variable, lw_rmse_pooled
from .model import (
    CaeArchitecture,
    CaeModel,
    ResBlockParams,
    build_model,
    decode,
    decode_batched,
    encode,
    encode_batched,
)
from .trainer import EpochRecord, ReduceLROnPlateau, TrainConfig, TrainResult, read_trace, train, write_trace

__all__ = [
    "CAE_MAGIC",
    "load_model",
    "save_model",
    "lw_rmse",
    "lw_rmse_node",
    "lw_rmse_per_variable",
    "lw_rmse_pooled",
    "CaeArchitecture",
    "CaeModel",
    "ResBlockParams",
    "build_model",
    "decode",
    "decode_batched",
    "encode",
    "encode_batched",
    "EpochRecord",
    "ReduceLROnPlateau",
    "TrainConfig",
    "TrainResult",
    "read_trace",
    "train",
    "write_trace",
]
