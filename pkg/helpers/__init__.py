"""
Helpers Module

Signal processing, network definitions, checkpoints and file formats shared
by the pipeline steps.
"""

from .audio_io import read_wav, write_wav
from .checkpoints import load_checkpoint, save_checkpoint
from .spectral import MelSpectrogram, NormStats, griffin_lim_invert, mel_spectrogram

__all__ = [
    "read_wav",
    "write_wav",
    "load_checkpoint",
    "save_checkpoint",
    "MelSpectrogram",
    "NormStats",
    "mel_spectrogram",
    "griffin_lim_invert",
]
