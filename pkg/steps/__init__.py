"""
Steps Module

The four pipeline stages:
1. Prepare the corpus (decode, resample, split, normalize)
2. Train the mel-spectrogram vocoder
3. Train the privacy filter/generator
4. Evaluate with fixed classifiers and FID
"""

from .step1_prepare_dataset import load_dataset, load_prepared, prepare_clip, run_prepare, split_speakers
from .step2_train_vocoder import GriffinLimVocoder, LearnedVocoder, load_pretrained, train_vocoder, vocode
from .step3_train_privacy import distortion_penalty, train, transform
from .step4_evaluate import (
    accuracy_eval,
    evaluate_run,
    fid_audio,
    frechet_distance,
    tradeoff_report,
    train_fixed_classifiers,
)

__all__ = [
    "load_dataset",
    "prepare_clip",
    "split_speakers",
    "run_prepare",
    "load_prepared",
    "train_vocoder",
    "vocode",
    "load_pretrained",
    "GriffinLimVocoder",
    "LearnedVocoder",
    "distortion_penalty",
    "train",
    "transform",
    "train_fixed_classifiers",
    "accuracy_eval",
    "frechet_distance",
    "fid_audio",
    "evaluate_run",
    "tradeoff_report",
]
