"""
SPECTRAL

Waveform -> normalized log-mel spectrogram and back.

Centered Hann-window STFT (reflect padding), triangular mel filterbank with
every row peak-normalized to 1, one global (mean, scale) normalization with
clipping at clip_sigmas standard deviations, and a Griffin-Lim inversion
used as the vocoder-independent fallback.
"""

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import librosa
import numpy as np

from helpers.tensor_cache import SPECTROGRAM_MAGIC, read_tensor_cache, write_tensor_cache
from settings.experiment import SpectralConfig
from utils.error_handler import CacheFormatError, DegenerateStatisticsError, DimensionError, DomainError
from utils.file_operations import atomic_write_json, read_json
from utils.logging_config import get_logger

logger = get_logger("spectral")


@dataclass(frozen=True)
class NormStats:
    """Global log-mel statistics of the training corpus."""

    mean: float
    scale: float

    def validate(self) -> "NormStats":
        if not np.isfinite(self.mean) or not np.isfinite(self.scale) or self.scale <= 0:
            raise DegenerateStatisticsError(
                f"Normalization scale must be positive and finite, got mean={self.mean}, scale={self.scale}",
                error_code="DEGENERATE_STATS",
                details={"mean": self.mean, "scale": self.scale}
            )
        return self

    def fingerprint(self, cfg: SpectralConfig) -> str:
        """Hash of the spectral settings together with these statistics."""
        payload = {"spectral": cfg.to_dict(), "mean": repr(float(self.mean)), "scale": repr(float(self.scale))}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {"mean": float(self.mean), "scale": float(self.scale)}


@dataclass
class MelSpectrogram:
    """Normalized log-mel matrix (n_mels x T) with the statistics used to produce it."""

    values: np.ndarray
    norm_mean: float
    norm_scale: float
    source_rate: int
    clip_sigmas: float = 3.0
    extra: dict = field(default_factory=dict)

    @property
    def stats(self) -> NormStats:
        return NormStats(self.norm_mean, self.norm_scale)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    def with_values(self, values: np.ndarray) -> "MelSpectrogram":
        """Same normalization metadata, new normalized values."""
        return MelSpectrogram(
            values=np.asarray(values, dtype=np.float64),
            norm_mean=self.norm_mean,
            norm_scale=self.norm_scale,
            source_rate=self.source_rate,
            clip_sigmas=self.clip_sigmas,
        )


def stft_complex(samples: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise DimensionError(
            f"Expected a 1-D waveform, got shape {samples.shape}",
            error_code="BAD_WAVEFORM_SHAPE",
            details={"shape": list(samples.shape)}
        )
    if samples.shape[0] < cfg.window_size:
        raise DimensionError(
            f"Waveform of {samples.shape[0]} samples is shorter than one window ({cfg.window_size})",
            error_code="WAVEFORM_TOO_SHORT",
            details={"num_samples": int(samples.shape[0]), "window_size": cfg.window_size}
        )
    return librosa.stft(
        samples,
        n_fft=cfg.window_size,
        hop_length=cfg.hop,
        win_length=cfg.window_size,
        window="hann",
        center=True,
        pad_mode="reflect",
    )


def stft_magnitude(samples: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """
    Magnitude STFT with centered frames.

    Args:
        samples: 1-D waveform with at least window_size samples
        cfg: Spectral settings

    Returns:
        Non-negative matrix of shape (window_size/2+1, 1 + len//hop)

    Raises:
        DimensionError: If the input is shorter than one window
    """
    return np.abs(stft_complex(samples, cfg))


@lru_cache(maxsize=8)
def _mel_basis(sample_rate: int, window_size: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    basis = librosa.filters.mel(
        sr=sample_rate,
        n_fft=window_size,
        n_mels=n_mels,
        fmin=fmin,
        fmax=fmax,
        htk=False,
        norm=None,
        dtype=np.float64,
    )
    peaks = basis.max(axis=1, keepdims=True)
    if np.any(peaks <= 0):
        empty = np.flatnonzero(peaks[:, 0] <= 0).tolist()
        raise DomainError(
            f"Mel filters {empty} cover no FFT bin; reduce n_mels or increase window_size",
            error_code="EMPTY_MEL_FILTER",
            details={"empty_filters": empty, "n_mels": n_mels, "window_size": window_size}
        )
    basis = basis / peaks
    basis.setflags(write=False)
    return basis


def mel_basis(cfg: SpectralConfig) -> np.ndarray:
    """Triangular mel filterbank of shape (n_mels, window_size/2+1), rows peak-normalized to 1."""
    return _mel_basis(cfg.sample_rate, cfg.window_size, cfg.n_mels, float(cfg.fmin), float(cfg.fmax))


@lru_cache(maxsize=8)
def _mel_pseudo_inverse(sample_rate: int, window_size: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    inverse = np.linalg.pinv(_mel_basis(sample_rate, window_size, n_mels, fmin, fmax))
    inverse.setflags(write=False)
    return inverse


def mel_project(mag: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """
    Project STFT magnitudes onto the mel filterbank.

    Raises:
        DomainError: If mag has negative entries
        DimensionError: If mag does not have window_size/2+1 rows
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.shape[-2] != cfg.n_freqs:
        raise DimensionError(
            f"Expected {cfg.n_freqs} frequency rows, got {mag.shape[-2]}",
            error_code="BAD_SPECTRUM_SHAPE",
            details={"shape": list(mag.shape), "n_freqs": cfg.n_freqs}
        )
    if np.any(mag < 0):
        raise DomainError(
            "Magnitude spectrogram has negative entries",
            error_code="NEGATIVE_MAGNITUDE",
            details={"min_value": float(mag.min())}
        )
    return mel_basis(cfg) @ mag


def log_mel(samples: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """log(max(mel, log_floor)) of a waveform."""
    mel = mel_project(stft_magnitude(samples, cfg), cfg)
    return np.log(np.maximum(mel, cfg.log_floor))


def compute_stats(logmels: Iterable[np.ndarray]) -> NormStats:
    """
    Single global mean and standard deviation over every bin and frame of
    every log-mel matrix.
    """
    total = 0.0
    total_sq = 0.0
    count = 0
    for logmel in logmels:
        values = np.asarray(logmel, dtype=np.float64)
        total += float(values.sum())
        total_sq += float(np.square(values).sum())
        count += values.size

    if count == 0:
        raise DegenerateStatisticsError(
            "Cannot compute normalization statistics from an empty corpus",
            error_code="EMPTY_CORPUS"
        )

    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0)
    stats = NormStats(mean=mean, scale=float(np.sqrt(variance)))
    logger.info(f"Normalization stats over {count} entries: mean={stats.mean:.6f}, scale={stats.scale:.6f}")
    return stats.validate()


def normalize(
    logmel: np.ndarray,
    stats: NormStats,
    clip_sigmas: float = 3.0,
    source_rate: int = 8000
) -> MelSpectrogram:
    """
    Map a log-mel matrix to [-1, 1]: clip((x - mean) / (clip_sigmas * scale), -1, 1).

    Raises:
        DegenerateStatisticsError: If stats.scale <= 0
    """
    stats.validate()
    values = (np.asarray(logmel, dtype=np.float64) - stats.mean) / (clip_sigmas * stats.scale)
    return MelSpectrogram(
        values=np.clip(values, -1.0, 1.0),
        norm_mean=float(stats.mean),
        norm_scale=float(stats.scale),
        source_rate=int(source_rate),
        clip_sigmas=float(clip_sigmas),
    )


def denormalize(mspec: MelSpectrogram, to_linear: bool = True) -> np.ndarray:
    """
    Inverse of normalize on the non-clipped region.

    Args:
        mspec: Normalized spectrogram
        to_linear: Exponentiate back to linear mel magnitude (otherwise return log-mel)
    """
    mspec.stats.validate()
    logmel = np.asarray(mspec.values, dtype=np.float64) * (mspec.clip_sigmas * mspec.norm_scale) + mspec.norm_mean
    return np.exp(logmel) if to_linear else logmel


def mel_spectrogram(samples: np.ndarray, stats: NormStats, cfg: SpectralConfig) -> MelSpectrogram:
    """Waveform -> normalized MelSpectrogram."""
    return normalize(log_mel(samples, cfg), stats, clip_sigmas=cfg.clip_sigmas, source_rate=cfg.sample_rate)


def mel_to_linear(mel: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Lift mel magnitudes to STFT magnitudes with the filterbank pseudo-inverse, clipped at 0."""
    inverse = _mel_pseudo_inverse(cfg.sample_rate, cfg.window_size, cfg.n_mels, float(cfg.fmin), float(cfg.fmax))
    return np.maximum(inverse @ np.asarray(mel, dtype=np.float64), 0.0)


def spectral_convergence(estimate: np.ndarray, target: np.ndarray) -> float:
    """||estimate - target||_F / ||target||_F"""
    denominator = max(float(np.linalg.norm(target)), np.finfo(np.float64).tiny)
    return float(np.linalg.norm(estimate - target) / denominator)


def griffin_lim_invert(
    mspec: MelSpectrogram,
    cfg: SpectralConfig,
    num_samples: Optional[int] = None,
    return_history: bool = False
) -> Union[np.ndarray, Tuple[np.ndarray, List[float]]]:
    """
    Invert a normalized mel spectrogram to a waveform.

    The mel magnitudes are lifted to linear frequency with the filterbank
    pseudo-inverse, then the phase is re-estimated with accelerated
    Griffin-Lim starting from a seeded random phase.

    Args:
        mspec: Normalized mel spectrogram (n_mels x T)
        cfg: Spectral settings (iterations, momentum, seed)
        num_samples: Output length, defaults to cfg.num_samples
        return_history: Also return the spectral convergence after every iteration

    Returns:
        Waveform in [-1, 1], optionally with the convergence history
    """
    num_samples = cfg.num_samples if num_samples is None else num_samples
    target = mel_to_linear(denormalize(mspec), cfg)

    rng = np.random.default_rng(cfg.griffin_lim_seed)
    angles = np.exp(2j * np.pi * rng.random(target.shape))
    previous = np.zeros_like(angles)
    momentum = cfg.griffin_lim_momentum / (1.0 + cfg.griffin_lim_momentum)
    history: List[float] = []

    def _istft(spectrum: np.ndarray) -> np.ndarray:
        return librosa.istft(
            spectrum,
            hop_length=cfg.hop,
            win_length=cfg.window_size,
            n_fft=cfg.window_size,
            window="hann",
            center=True,
            length=num_samples,
        )

    for _ in range(cfg.griffin_lim_iters):
        rebuilt = stft_complex(_istft(target * angles), cfg)
        history.append(spectral_convergence(np.abs(rebuilt), target))
        angles = rebuilt - momentum * previous
        angles = angles / (np.abs(angles) + 1e-16)
        previous = rebuilt

    waveform = np.clip(_istft(target * angles), -1.0, 1.0)
    if return_history:
        return waveform, history
    return waveform


def write_spectrogram_cache(
    file_path: Union[str, Path],
    values: np.ndarray,
    stats: NormStats,
    cfg: SpectralConfig
) -> Path:
    """
    Persist normalized spectrograms (count x n_mels x T) plus a JSON sidecar
    holding the normalization statistics.
    """
    file_path = Path(file_path)
    write_tensor_cache(file_path, SPECTROGRAM_MAGIC, values)
    atomic_write_json(
        sidecar_path(file_path),
        {**stats.to_dict(), "fingerprint": stats.fingerprint(cfg), "clip_sigmas": cfg.clip_sigmas},
    )
    return file_path


def read_spectrogram_cache(file_path: Union[str, Path]) -> Tuple[np.ndarray, NormStats]:
    """Read a spectrogram cache and its statistics sidecar."""
    file_path = Path(file_path)
    values = read_tensor_cache(file_path, SPECTROGRAM_MAGIC)
    sidecar = read_json(sidecar_path(file_path))
    try:
        stats = NormStats(mean=float(sidecar["mean"]), scale=float(sidecar["scale"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CacheFormatError(
            f"Malformed statistics sidecar for {file_path}: {e}",
            error_code="BAD_STATS_SIDECAR",
            details={"file_path": str(sidecar_path(file_path))}
        )
    return values, stats.validate()


def sidecar_path(file_path: Union[str, Path]) -> Path:
    file_path = Path(file_path)
    return file_path.with_name(file_path.stem + "_stats.json")
