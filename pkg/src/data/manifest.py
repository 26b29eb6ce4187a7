"""CSV manifest of snapshot files and their time ranges."""
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Union

import pandas as pd

from ..utils.error_handler import FormatError
from ..utils.logger import get_logger
from .snapshots import SnapshotSequence

logger = get_logger(__name__)

MANIFEST_COLUMNS = ["path", "t_start", "t_end", "count", "variables"]


@dataclass
class ManifestEntry:
    path: str
    t_start: float
    t_end: float
    count: int
    variables: str

    @classmethod
    def for_sequence(cls, path: Union[str, Path], seq: SnapshotSequence) -> "ManifestEntry":
        return cls(
            path=str(path),
            t_start=float(seq.timestamps[0]) if len(seq) else 0.0,
            t_end=float(seq.timestamps[-1]) if len(seq) else 0.0,
            count=len(seq),
            variables=";".join(seq.descriptor.variables),
        )


def write_manifest(path: Union[str, Path], entries: List[ManifestEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(e) for e in entries], columns=MANIFEST_COLUMNS)
    frame.to_csv(path, index=False)
    return path


def read_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    frame = pd.read_csv(path, dtype={"path": str, "variables": str})
    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"manifest {path} lacks columns {missing}")
    return [
        ManifestEntry(
            path=row["path"],
            t_start=float(row["t_start"]),
            t_end=float(row["t_end"]),
            count=int(row["count"]),
            variables=row["variables"],
        )
        for row in frame.to_dict("records")
    ]


def record_in_manifest(manifest_path: Union[str, Path], entry: ManifestEntry) -> Path:
    """Add ``entry`` to the manifest, replacing any previous row for the same file."""
    manifest_path = Path(manifest_path)
    entries = read_manifest(manifest_path) if manifest_path.exists() else []
    entries = [e for e in entries if e.path != entry.path] + [entry]
    logger.debug(f"Manifest {manifest_path}: {len(entries)} entries")
    return write_manifest(manifest_path, entries)
