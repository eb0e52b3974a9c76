"""JSON/CSV artifact writers and the hashed run manifest."""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence
import csv
import hashlib
import json
import logging

import numpy as np

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, enums, tuples and paths into JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return value.as_posix()
    return value


def write_json(path: Path, data: Any) -> Path:
    """Sorted keys; floats keep their shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def write_csv(path: Path, rows: Iterable[dict], columns: Sequence[str]) -> Path:
    """UTF-8 CSV with a header row, fixed column order and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
    logger.info(f"Wrote {path}")
    return path


def write_matrix_csv(path: Path, matrix: Any) -> Path:
    """Dense or sparse matrix as a headerless CSV grid."""
    dense = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(dense):
            writer.writerow([format_cell(float(v)) for v in row])
    logger.debug(f"Wrote {dense.shape[0]}x{dense.shape[-1]} matrix to {path}")
    return path


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """
    Record of one run: config echo, tool version, timestamps and artifact hashes.

    Attributes:
        config: Validated configuration as written back out
        version: Package version
        started_at: UTC start time (ISO 8601)
        finished_at: UTC finish time
        artifacts: Path relative to the output directory -> SHA-256
        status: "ok" or the failure class
        exit_code: Process exit status
        output_dir: Directory the artifacts live in
    """
    config: dict
    version: str
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    artifacts: dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    exit_code: int = 0
    output_dir: Optional[Path] = None

    def finalize(self, output_dir: Path) -> "RunManifest":
        """Hash every file under the output directory except the manifest itself."""
        root = Path(output_dir)
        self.output_dir = root
        self.artifacts = {
            p.relative_to(root).as_posix(): sha256_file(p)
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.relative_to(root).as_posix() != MANIFEST_NAME
        }
        self.finished_at = _now()
        return self

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "artifacts": dict(self.artifacts),
            "status": self.status,
            "exit_code": self.exit_code,
        }

    def write(self) -> Path:
        if self.output_dir is None:
            raise ValueError("Manifest has not been finalized")
        return write_json(self.output_dir / MANIFEST_NAME, self.to_dict())
