"""
AUDIO I/O

Reads and writes 16-bit PCM mono WAV files with pydub. Amplitudes are
mapped to [-1, 1] by dividing by 32768.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydub import AudioSegment

from settings.config import Config
from utils.error_handler import WavParseError
from utils.file_operations import ensure_directory
from utils.logging_config import get_logger

logger = get_logger("audio_io")


def read_wav(file_path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    """
    Read a RIFF/WAVE file.

    Args:
        file_path: Path to a 16-bit PCM mono WAV file

    Returns:
        (samples as float32 in [-1, 1], sample rate in Hz)

    Raises:
        WavParseError: If the header cannot be parsed or the format is not
            16-bit mono PCM
    """
    file_path = Path(file_path)
    try:
        segment = AudioSegment(data=file_path.read_bytes())
    except Exception as e:
        raise WavParseError(
            f"Could not parse WAV file {file_path}: {e}",
            error_code="WAV_PARSE_FAILED",
            details={"file_path": str(file_path)}
        )

    if segment.sample_width != 2 or segment.channels != 1:
        raise WavParseError(
            f"Expected 16-bit mono PCM in {file_path}, got {8 * segment.sample_width}-bit "
            f"with {segment.channels} channel(s)",
            error_code="UNSUPPORTED_WAV_FORMAT",
            details={
                "file_path": str(file_path),
                "sample_width": segment.sample_width,
                "channels": segment.channels,
            }
        )

    pcm = np.array(segment.get_array_of_samples(), dtype=np.int16)
    samples = pcm.astype(np.float32) / Config.PCM_SCALE
    return samples, int(segment.frame_rate)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    """Quantize [-1, 1] float samples to int16 (values outside are clipped)."""
    scaled = np.round(np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * Config.PCM_SCALE)
    return np.clip(scaled, -32768, 32767).astype(np.int16)


def write_wav(file_path: Union[str, Path], samples: np.ndarray, sample_rate: int) -> Path:
    """
    Write float samples as a 16-bit PCM mono WAV file.

    Args:
        file_path: Output path
        samples: Waveform with amplitudes in [-1, 1]
        sample_rate: Sample rate in Hz

    Returns:
        Path to the written file
    """
    file_path = Path(file_path)
    ensure_directory(file_path.parent)
    segment = AudioSegment(
        data=to_pcm16(samples).tobytes(),
        sample_width=2,
        frame_rate=int(sample_rate),
        channels=1,
    )
    handle = segment.export(str(file_path), format="wav")
    handle.close()
    logger.debug(f"Wrote {len(samples)} samples at {sample_rate} Hz to {file_path}")
    return file_path
