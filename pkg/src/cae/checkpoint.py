"""ROMCAE1 model checkpoints.

Layout (little-endian):
    magic "ROMCAE1"
    u32 C, H, W, stem_channels, n_stages
    u32 stage_channels[n_stages]
    u32 latent_channels, cbam flag (0/1), reduction
    u64 parameter count P
    P float64 parameters, concatenated in declaration order
"""
from pathlib import Path
from typing import Union

from ..tensor.params import ParameterSet
from ..utils.binary_io import RecordReader, RecordWriter
from ..utils.error_handler import ConfigurationError, FormatError
from ..utils.logger import get_logger
from .model import CaeArchitecture, CaeModel

logger = get_logger(__name__)

CAE_MAGIC = b"ROMCAE1"


def save_model(path: Union[str, Path], model: CaeModel) -> Path:
    a = model.arch
    writer = RecordWriter(CAE_MAGIC).u32(a.channels, a.height, a.width, a.stem_channels, a.n_stages)
    writer.u32(*a.stage_channels).u32(a.latent_channels, int(a.cbam), a.reduction)
    flat = model.params.flatten()
    writer.u64(flat.size).f64(flat)
    path = writer.write(path)
    logger.debug(f"Saved CAE checkpoint ({flat.size} parameters) to {path}")
    return path


def load_model(path: Union[str, Path]) -> CaeModel:
    reader = RecordReader.open(path, CAE_MAGIC, "ROMCAE1")
    channels, height, width = reader.u32("C"), reader.u32("H"), reader.u32("W")
    stem = reader.u32("stem channels")
    n_stages = reader.u32("stage count")
    if n_stages == 0 or n_stages > 16:
        raise FormatError(f"ROMCAE1 declares an implausible stage count {n_stages}")
    stages = tuple(reader.u32(f"stage {s} channels") for s in range(n_stages))
    latent = reader.u32("latent channels")
    cbam_flag = reader.u32("cbam flag")
    if cbam_flag not in (0, 1):
        raise FormatError(f"ROMCAE1 cbam flag must be 0 or 1, found {cbam_flag}")
    reduction = reader.u32("reduction")
    try:
        arch = CaeArchitecture(channels, height, width, stem, stages, latent, bool(cbam_flag), reduction)
    except ConfigurationError as e:
        raise FormatError(f"ROMCAE1 architecture block is invalid: {e.message}", original_error=e)

    count = reader.u64("parameter count")
    shapes = arch.parameter_shapes()
    expected = arch.parameter_count()
    if count != expected:
        raise FormatError(f"ROMCAE1 declares {count} parameters but the architecture needs {expected}")
    flat = reader.f64(count, "parameters")
    reader.expect_end()
    return CaeModel(arch, ParameterSet.from_flat(shapes, flat))
