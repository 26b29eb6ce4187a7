"""ROMOP1 operator checkpoints: magic "ROMOP1", u32 n, u32 d, then L row-major float64."""
from pathlib import Path
from typing import Union

from ..utils.binary_io import RecordReader, RecordWriter
from ..utils.error_handler import FormatError
from .operator import DelayRom

OP_MAGIC = b"ROMOP1"


def save_operator(path: Union[str, Path], rom: DelayRom) -> Path:
    return RecordWriter(OP_MAGIC).u32(rom.n, rom.d).f64(rom.L).write(path)


def load_operator(path: Union[str, Path]) -> DelayRom:
    reader = RecordReader.open(path, OP_MAGIC, "ROMOP1")
    n, d = reader.u32("n"), reader.u32("d")
    if n == 0 or d == 0:
        raise FormatError(f"ROMOP1 header declares n={n}, d={d}")
    L = reader.f64(n * n * d, "operator", (n, n * d))
    reader.expect_end()
    return DelayRom(L, d)
