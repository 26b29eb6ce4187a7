"""ROMPOD1 basis checkpoints.

Layout (little-endian):
    magic "ROMPOD1"
    u32 C, H, W, k, weighted flag (0/1)
    float64 discarded energy
    D = C·H·W float64 mean
    k float64 singular values
    D·k float64 modes, row-major [D, k]
    D float64 feature weights (only when the weighted flag is 1)
"""
from pathlib import Path
from typing import Union

from ..utils.binary_io import RecordReader, RecordWriter
from ..utils.error_handler import FormatError
from ..utils.logger import get_logger
from .basis import PodBasis

logger = get_logger(__name__)

POD_MAGIC = b"ROMPOD1"


def save_basis(path: Union[str, Path], basis: PodBasis) -> Path:
    c, h, w = basis.field_shape
    writer = RecordWriter(POD_MAGIC).u32(c, h, w, basis.k, int(basis.weighted))
    writer.f64([basis.discarded_energy]).f64(basis.mean).f64(basis.singular_values).f64(basis.modes)
    if basis.weighted:
        writer.f64(basis.weights)
    path = writer.write(path)
    logger.debug(f"Saved POD basis (D={basis.dim}, k={basis.k}) to {path}")
    return path


def load_basis(path: Union[str, Path]) -> PodBasis:
    reader = RecordReader.open(path, POD_MAGIC, "ROMPOD1")
    c, h, w = reader.u32("C"), reader.u32("H"), reader.u32("W")
    k = reader.u32("mode count")
    weighted = reader.u32("weighted flag")
    d = c * h * w
    if d == 0 or not 1 <= k <= d:
        raise FormatError(f"ROMPOD1 header declares extents {c}x{h}x{w} with k={k}")
    if weighted not in (0, 1):
        raise FormatError(f"ROMPOD1 weighted flag must be 0 or 1, found {weighted}")
    (discarded,) = reader.f64(1, "discarded energy")
    mean = reader.f64(d, "mean")
    sigma = reader.f64(k, "singular values")
    modes = reader.f64(d * k, "modes", (d, k))
    weights = reader.f64(d, "feature weights") if weighted else None
    reader.expect_end()
    return PodBasis(mean, modes, sigma, float(discarded), weights, (c, h, w))
