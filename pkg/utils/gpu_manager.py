"""
Device Management Utility

Device selection (environment override, CUDA availability), reproducible
seeding and cache cleanup for training and evaluation runs.
"""

import gc
import random
from typing import Any, Dict, Optional

import numpy as np
import torch

from settings.config import Config
from utils.error_handler import ConfigurationError
from utils.logging_config import get_logger

logger = get_logger("gpu_manager")


def resolve_device(preferred: Optional[str] = None) -> torch.device:
    """
    Resolve the torch device to use.

    Args:
        preferred: "auto", "cpu", "cuda" or "cuda:N". Defaults to Config.DEVICE
            (PRIVATE_SPEECH_DEVICE environment variable).

    Returns:
        torch.device

    Raises:
        ConfigurationError: If a CUDA device is requested but unavailable
    """
    choice = (preferred or Config.DEVICE or "auto").strip().lower()

    if choice == "auto":
        device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    elif choice == "cpu":
        device = torch.device("cpu")
    elif choice.startswith("cuda"):
        if not torch.cuda.is_available():
            raise ConfigurationError(
                f"Device {choice} requested but CUDA is not available",
                error_code="CUDA_UNAVAILABLE",
                details={"device": choice}
            )
        try:
            device = torch.device(choice)
        except RuntimeError as e:
            raise ConfigurationError(
                f"Invalid device string: {choice}",
                error_code="INVALID_DEVICE",
                details={"device": choice, "error": str(e)}
            )
    else:
        raise ConfigurationError(
            f"Invalid device string: {choice}",
            error_code="INVALID_DEVICE",
            details={"device": choice}
        )

    logger.debug(f"Resolved device {choice!r} -> {device}")
    return device


def seed_everything(seed: int) -> None:
    """Seed Python, NumPy and torch (CPU and CUDA) random number generators."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    if torch.cuda.is_available():
        torch.cuda.manual_seed_all(seed)


def capture_rng_state() -> Dict[str, Any]:
    """Snapshot of the global RNG states (for checkpoint/resume)."""
    state = {
        "python": random.getstate(),
        "torch": torch.get_rng_state(),
    }
    if torch.cuda.is_available():
        state["cuda"] = torch.cuda.get_rng_state_all()
    return state


def restore_rng_state(state: Dict[str, Any]) -> None:
    """Restore RNG states captured by capture_rng_state."""
    if "python" in state:
        python_state = state["python"]
        random.setstate((python_state[0], tuple(python_state[1]), python_state[2]))
    if "torch" in state:
        torch.set_rng_state(state["torch"])
    if "cuda" in state and torch.cuda.is_available():
        torch.cuda.set_rng_state_all(state["cuda"])


def clear_gpu_cache() -> None:
    """Clear GPU memory cache (no-op on CPU beyond garbage collection)."""
    if torch.cuda.is_available():
        torch.cuda.empty_cache()
        torch.cuda.ipc_collect()
    gc.collect()


def get_gpu_info() -> Dict[str, Any]:
    """Get GPU information for run headers"""
    if not torch.cuda.is_available():
        return {"available": False, "reason": "CUDA not available"}

    try:
        props = torch.cuda.get_device_properties(torch.cuda.current_device())
        return {
            "available": True,
            "device_name": props.name,
            "compute_capability": f"{props.major}.{props.minor}",
            "total_memory_gb": props.total_memory / (1024**3),
        }
    except Exception as e:
        logger.error(f"Error getting GPU info: {e}")
        return {"available": False, "reason": str(e)}
