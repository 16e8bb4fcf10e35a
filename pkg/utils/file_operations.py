"""
File Operations Utilities

Atomic writes, content hashing and append-only CSV streams for caches,
checkpoints, metrics and reports.
"""

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import torch

from utils.error_handler import DataError
from utils.logging_config import get_logger

logger = get_logger("file_operations")

PathLike = Union[str, Path]


def ensure_directory(path: PathLike) -> Path:
    """Create a directory (and parents) if needed and return it as a Path."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _temp_sibling(file_path: Path) -> Path:
    file_path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{file_path.name}.", suffix=".tmp", dir=file_path.parent)
    os.close(handle)
    return Path(temp_name)


def atomic_write_bytes(file_path: PathLike, payload: bytes) -> Path:
    """
    Write bytes to a file by writing a temporary sibling and renaming it.

    Readers never observe a partially written file.
    """
    file_path = Path(file_path)
    temp_path = _temp_sibling(file_path)
    try:
        with open(temp_path, "wb") as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_path, file_path)
    except OSError as e:
        temp_path.unlink(missing_ok=True)
        raise DataError(
            f"Failed to write file {file_path}: {e}",
            error_code="WRITE_FAILED",
            details={"file_path": str(file_path), "size": len(payload)}
        )
    logger.debug(f"Wrote {len(payload)} bytes to {file_path}")
    return file_path


def atomic_write_json(file_path: PathLike, data: Dict[str, Any]) -> Path:
    """Atomically write a JSON document (sorted keys, indented)."""
    text = json.dumps(data, indent=2, sort_keys=True)
    return atomic_write_bytes(file_path, text.encode("utf-8"))


def read_json(file_path: PathLike) -> Dict[str, Any]:
    """Read a JSON document, raising DataError when missing or malformed."""
    file_path = Path(file_path)
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError(
            f"File not found: {file_path}",
            error_code="FILE_NOT_FOUND",
            details={"file_path": str(file_path)}
        )
    except json.JSONDecodeError as e:
        raise DataError(
            f"Malformed JSON in {file_path}: {e}",
            error_code="MALFORMED_JSON",
            details={"file_path": str(file_path)}
        )


def atomic_torch_save(payload: Dict[str, Any], file_path: PathLike) -> Path:
    """torch.save through a temporary file followed by a rename."""
    file_path = Path(file_path)
    temp_path = _temp_sibling(file_path)
    try:
        torch.save(payload, temp_path)
        os.replace(temp_path, file_path)
    except Exception:
        temp_path.unlink(missing_ok=True)
        raise
    logger.debug(f"Saved checkpoint payload to {file_path}")
    return file_path


def file_sha256(file_path: PathLike, chunk_size: int = 1 << 20) -> str:
    """SHA-256 of a file's contents."""
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def tree_listing_hash(root: PathLike, pattern: str = "**/*.wav", extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Hash of a directory tree listing (relative path and size of every match)
    plus an optional settings dictionary.
    """
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(root.glob(pattern)):
        if path.is_file():
            digest.update(f"{path.relative_to(root).as_posix()}:{path.stat().st_size}\n".encode("utf-8"))
    if extra:
        digest.update(json.dumps(extra, sort_keys=True, default=str).encode("utf-8"))
    return digest.hexdigest()


class CsvStream:
    """Append-only CSV file with a fixed header."""

    def __init__(self, file_path: PathLike, columns: Sequence[str]):
        self.file_path = Path(file_path)
        self.columns = list(columns)
        self.file_path.parent.mkdir(parents=True, exist_ok=True)
        if not self.file_path.exists() or self.file_path.stat().st_size == 0:
            with open(self.file_path, "w", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(self.columns)

    def append(self, row: Dict[str, Any]) -> None:
        with open(self.file_path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow([_csv_value(row.get(column)) for column in self.columns])

    def read(self) -> List[Dict[str, str]]:
        with open(self.file_path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))

    def truncate_after(self, column: str, last_value: int) -> int:
        """Drop rows whose integer `column` exceeds `last_value`. Returns rows kept."""
        kept = [row for row in self.read() if int(row[column]) <= last_value]
        write_csv(self.file_path, self.columns, kept)
        return len(kept)


def _csv_value(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(file_path: PathLike, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Atomically write a whole CSV file."""
    file_path = Path(file_path)
    temp_path = _temp_sibling(file_path)
    with open(temp_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([_csv_value(row.get(column)) for column in columns])
    os.replace(temp_path, file_path)
    return file_path


def read_csv(file_path: PathLike) -> List[Dict[str, str]]:
    """Read a CSV file into a list of row dictionaries."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise DataError(
            f"File not found: {file_path}",
            error_code="FILE_NOT_FOUND",
            details={"file_path": str(file_path)}
        )
    with open(file_path, "r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
