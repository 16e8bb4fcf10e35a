"""
Flat binary tensor files used for the prepared-clip and spectrogram caches.

Layout: a little-endian header (magic, version, rows, cols, count) followed by
count*rows*cols row-major 32-bit floats.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from utils.error_handler import CacheFormatError
from utils.file_operations import atomic_write_bytes

HEADER = struct.Struct("<4sIIII")
CACHE_VERSION = 1

WAVEFORM_MAGIC = b"PSWV"
SPECTROGRAM_MAGIC = b"PSMS"


def write_tensor_cache(file_path: Union[str, Path], magic: bytes, data: np.ndarray) -> Path:
    """Write a (count, rows, cols) float array behind a fixed header."""
    array = np.ascontiguousarray(data, dtype="<f4")
    if array.ndim != 3:
        raise CacheFormatError(
            f"Cache tensors must be 3-dimensional, got shape {array.shape}",
            error_code="BAD_CACHE_SHAPE",
            details={"shape": list(array.shape)}
        )
    count, rows, cols = array.shape
    header = HEADER.pack(magic, CACHE_VERSION, rows, cols, count)
    return atomic_write_bytes(file_path, header + array.tobytes())


def read_tensor_cache(file_path: Union[str, Path], magic: bytes) -> np.ndarray:
    """
    Read a tensor cache written by write_tensor_cache.

    Raises:
        CacheFormatError: Wrong magic, unsupported version or truncated payload
    """
    file_path = Path(file_path)
    try:
        payload = file_path.read_bytes()
    except FileNotFoundError:
        raise CacheFormatError(
            f"Cache file not found: {file_path}",
            error_code="CACHE_NOT_FOUND",
            details={"file_path": str(file_path)}
        )

    if len(payload) < HEADER.size:
        raise CacheFormatError(
            f"Cache file {file_path} is shorter than its header",
            error_code="TRUNCATED_CACHE",
            details={"file_path": str(file_path), "size": len(payload)}
        )

    found_magic, version, rows, cols, count = HEADER.unpack_from(payload)
    if found_magic != magic:
        raise CacheFormatError(
            f"Unexpected cache magic {found_magic!r} in {file_path} (expected {magic!r})",
            error_code="BAD_CACHE_MAGIC",
            details={"file_path": str(file_path)}
        )
    if version != CACHE_VERSION:
        raise CacheFormatError(
            f"Unsupported cache version {version} in {file_path}",
            error_code="BAD_CACHE_VERSION",
            details={"file_path": str(file_path), "version": version}
        )

    expected = HEADER.size + 4 * rows * cols * count
    if len(payload) != expected:
        raise CacheFormatError(
            f"Cache file {file_path} has {len(payload)} bytes, expected {expected}",
            error_code="TRUNCATED_CACHE",
            details={"file_path": str(file_path), "size": len(payload), "expected": expected}
        )

    values = np.frombuffer(payload, dtype="<f4", offset=HEADER.size)
    return values.reshape(count, rows, cols).astype(np.float32)
