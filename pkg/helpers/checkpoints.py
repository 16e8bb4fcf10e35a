"""
CHECKPOINTS

Versioned checkpoint container shared by the privacy bundle, the vocoder and
the fixed classifiers:

    {"format", "version", "kind", "config", "tensors", "extra"}

Files are written atomically and loaded with weights_only=True.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import torch
import torch.nn as nn

from utils.error_handler import CheckpointFormatError, CheckpointTypeError, CompatibilityError
from utils.file_operations import atomic_torch_save
from utils.logging_config import get_logger

logger = get_logger("checkpoints")

CHECKPOINT_FORMAT = "private-speech-checkpoint"
CHECKPOINT_VERSION = 1
KINDS = ("privacy", "vocoder", "classifier")


def config_fingerprint(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def parameter_fingerprint(source: Union[nn.Module, Mapping[str, torch.Tensor]]) -> str:
    """SHA-256 over the names and raw bytes of a module's state (or a tensor map)."""
    state = source.state_dict() if isinstance(source, nn.Module) else source
    digest = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tuple(tensor.shape)).encode("utf-8"))
        digest.update(str(tensor.dtype).encode("utf-8"))
        digest.update(tensor.reshape(-1).view(torch.uint8).numpy().tobytes() if tensor.numel() else b"")
    return digest.hexdigest()


def save_checkpoint(
    file_path: Union[str, Path],
    kind: str,
    config: Dict[str, Any],
    tensors: Dict[str, torch.Tensor],
    extra: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write a checkpoint container atomically.

    Args:
        file_path: Output path
        kind: One of KINDS
        config: Config snapshot the tensors belong to
        tensors: Named parameter/buffer tensors
        extra: Optimizer state, RNG state, counters and fingerprints
    """
    if kind not in KINDS:
        raise CheckpointTypeError(
            f"Unknown checkpoint kind {kind!r}",
            error_code="UNKNOWN_KIND",
            details={"kind": kind, "kinds": list(KINDS)}
        )
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config,
        "tensors": {name: tensor.detach().cpu() for name, tensor in tensors.items()},
        "extra": extra or {},
    }
    path = atomic_torch_save(payload, file_path)
    logger.info(f"Saved {kind} checkpoint: {path}")
    return path


def load_checkpoint(
    file_path: Union[str, Path],
    expected_kind: str,
    expected_config: Optional[Dict[str, Any]] = None,
    map_location: Union[str, torch.device] = "cpu"
) -> Dict[str, Any]:
    """
    Load and verify a checkpoint container.

    Raises:
        CheckpointFormatError: Missing, truncated or foreign file
        CheckpointTypeError: Container holds another kind of model
        CompatibilityError: Config snapshot differs from expected_config
    """
    file_path = Path(file_path)
    if not file_path.is_file():
        raise CheckpointFormatError(
            f"Checkpoint not found: {file_path}",
            error_code="CHECKPOINT_NOT_FOUND",
            details={"file_path": str(file_path)}
        )
    try:
        payload = torch.load(file_path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise CheckpointFormatError(
            f"Could not read checkpoint {file_path}: {e}",
            error_code="CHECKPOINT_UNREADABLE",
            details={"file_path": str(file_path)}
        )

    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(
            f"{file_path} is not a private speech checkpoint",
            error_code="FOREIGN_CHECKPOINT",
            details={"file_path": str(file_path)}
        )
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CompatibilityError(
            f"Checkpoint version {payload.get('version')} is not supported (expected {CHECKPOINT_VERSION})",
            error_code="CHECKPOINT_VERSION",
            details={"file_path": str(file_path), "version": payload.get("version")}
        )
    if payload.get("kind") != expected_kind:
        raise CheckpointTypeError(
            f"{file_path} holds a {payload.get('kind')!r} checkpoint, expected {expected_kind!r}",
            error_code="WRONG_CHECKPOINT_KIND",
            details={"file_path": str(file_path), "kind": payload.get("kind"), "expected": expected_kind}
        )
    if expected_config is not None:
        found = config_fingerprint(payload.get("config", {}))
        wanted = config_fingerprint(expected_config)
        if found != wanted:
            raise CompatibilityError(
                f"Checkpoint config fingerprint {found[:12]} does not match expected {wanted[:12]}",
                error_code="CONFIG_MISMATCH",
                details={"file_path": str(file_path), "checkpoint": found, "expected": wanted}
            )

    logger.debug(f"Loaded {expected_kind} checkpoint: {file_path}")
    return payload
