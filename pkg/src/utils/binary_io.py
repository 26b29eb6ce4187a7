"""Little-endian record reader/writer shared by the ROM* artifact formats.

All artifacts start with a 7-byte ASCII magic string followed by fixed-width
unsigned integers and float64 payloads, little-endian throughout.
"""
import struct
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from .error_handler import FormatError

PathLike = Union[str, Path]

_F8 = np.dtype("<f8")


class RecordWriter:
    """Accumulates a binary record in memory and writes it in one go."""

    def __init__(self, magic: bytes):
        self._chunks: List[bytes] = [magic]

    def u32(self, *values: int) -> "RecordWriter":
        for value in values:
            if value < 0 or value > 0xFFFFFFFF:
                raise FormatError(f"value {value} does not fit an unsigned 32-bit field")
            self._chunks.append(struct.pack("<I", int(value)))
        return self

    def u64(self, value: int) -> "RecordWriter":
        self._chunks.append(struct.pack("<Q", int(value)))
        return self

    def f64(self, values) -> "RecordWriter":
        array = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
        self._chunks.append(array.astype(_F8, copy=False).tobytes(order="C"))
        return self

    def text(self, value: str) -> "RecordWriter":
        """Length-prefixed (u32) ASCII string."""
        try:
            encoded = value.encode("ascii")
        except UnicodeEncodeError as e:
            raise FormatError(f"name {value!r} is not ASCII", original_error=e)
        self.u32(len(encoded))
        self._chunks.append(encoded)
        return self

    def to_bytes(self) -> bytes:
        return b"".join(self._chunks)

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path


class RecordReader:
    """Sequential reader with truncation checks; every failure is a FormatError."""

    def __init__(self, payload: bytes, magic: bytes, kind: str):
        self.kind = kind
        self._buf = memoryview(payload)
        self._pos = 0
        found = bytes(self._buf[: len(magic)])
        if found != magic:
            raise FormatError(f"bad magic for {kind}: expected {magic!r}, found {found!r}")
        self._pos = len(magic)

    @classmethod
    def open(cls, path: PathLike, magic: bytes, kind: str) -> "RecordReader":
        return cls(Path(path).read_bytes(), magic, kind)

    def _take(self, nbytes: int, what: str) -> memoryview:
        end = self._pos + nbytes
        if end > len(self._buf):
            raise FormatError(
                f"truncated {self.kind}: needed {nbytes} bytes for {what} at offset {self._pos}, "
                f"only {len(self._buf) - self._pos} remain"
            )
        chunk = self._buf[self._pos:end]
        self._pos = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self._take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self._take(8, what))[0]

    def f64(self, count: int, what: str, shape: Sequence[int] = ()) -> np.ndarray:
        raw = self._take(8 * count, what)
        array = np.frombuffer(raw, dtype=_F8).astype(np.float64)
        return array.reshape(tuple(shape)) if shape else array

    def text(self, what: str) -> str:
        length = self.u32(f"{what} length")
        raw = bytes(self._take(length, what))
        try:
            return raw.decode("ascii")
        except UnicodeDecodeError as e:
            raise FormatError(f"{what} in {self.kind} is not ASCII", original_error=e)

    @property
    def remaining(self) -> int:
        return len(self._buf) - self._pos

    def expect_end(self) -> None:
        if self.remaining:
            raise FormatError(
                f"{self.kind} payload length does not match its header: {self.remaining} trailing bytes"
            )


def read_magic(path: PathLike, length: int = 7) -> bytes:
    """Return the leading magic bytes of an artifact (used for format dispatch)."""
    with open(path, "rb") as handle:
        return handle.read(length)
