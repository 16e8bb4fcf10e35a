"""
Shared fixtures: a synthetic two-gender tone corpus written as real 16-bit
WAV files with AudioMNIST naming, and miniature experiment configs.

Speakers differ by gender in their fundamental frequency; digits differ by
the frequency of an added upper partial, so both attributes are visible in a
mel spectrogram.
"""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from helpers.audio_io import write_wav
from settings.experiment import (
    AudioNetConfig,
    ClassifierConfig,
    DiscriminatorConfig,
    ExperimentConfig,
    SpectralConfig,
    TrainConfig,
    UNetConfig,
    VocoderConfig,
)

RAW_RATE = 16000
SPEAKERS = {"01": "male", "02": "female", "03": "male", "04": "female", "05": "male", "06": "female"}
DIGITS = (0, 1, 2)
REPETITIONS = 3


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long trend runs, enabled with RUN_SLOW_TESTS=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("RUN_SLOW_TESTS") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set RUN_SLOW_TESTS=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def tone(gender: str, digit: int, speaker_index: int, repetition: int, rate: int = RAW_RATE,
         seconds: float = 0.45) -> np.ndarray:
    """Harmonic tone for one synthetic recording."""
    rng = np.random.default_rng(1000 * speaker_index + 10 * digit + repetition)
    t = np.arange(int(rate * seconds)) / rate
    f0 = (140.0 if gender == "male" else 320.0) * (1.0 + 0.03 * speaker_index)
    partial = 900.0 + 700.0 * digit
    signal = 0.35 * np.sin(2 * np.pi * f0 * t) + 0.2 * np.sin(2 * np.pi * 2 * f0 * t)
    signal += 0.3 * np.sin(2 * np.pi * partial * t)
    envelope = np.minimum(1.0, np.minimum(t, t[-1] - t) * 20.0)
    return (signal * envelope + 0.005 * rng.standard_normal(t.shape)).astype(np.float32)


def write_tone_corpus(root: Path, speakers=SPEAKERS, digits=DIGITS, repetitions=REPETITIONS) -> Path:
    """Write <root>/<speaker>/<digit>_<speaker>_<rep>.wav and return the metadata path."""
    root.mkdir(parents=True, exist_ok=True)
    for index, (speaker, gender) in enumerate(sorted(speakers.items())):
        for digit in digits:
            for rep in range(repetitions):
                write_wav(root / speaker / f"{digit}_{speaker}_{rep}.wav", tone(gender, digit, index, rep), RAW_RATE)
    metadata = root / "audioMNIST_meta.txt"
    metadata.write_text(json.dumps({s: {"gender": g, "age": "30"} for s, g in speakers.items()}))
    return metadata


@pytest.fixture(scope="session")
def tone_corpus(tmp_path_factory):
    """(data_root, metadata_path) of the shared synthetic corpus."""
    root = tmp_path_factory.mktemp("corpus") / "data"
    metadata = write_tone_corpus(root)
    return root, metadata


@pytest.fixture
def spectral():
    return SpectralConfig()


@pytest.fixture
def tiny_unet():
    return UNetConfig(depth=2, base_channels=4)


@pytest.fixture
def tiny_disc():
    return DiscriminatorConfig(channels=(4, 4, 4, 4, 4), hidden=16, dropout=0.0, pool_output=(2, 2))


@pytest.fixture
def tiny_audionet():
    return AudioNetConfig(channels=(4, 4, 4, 4), pool=8, hidden=16, dropout=0.0)


@pytest.fixture
def tiny_vocoder():
    return VocoderConfig(
        ngf=4, n_residual_layers=1, num_discriminators=2, ndf=4, disc_layers=2,
        disc_max_channels=16, batch_size=2, steps=4, eval_every=2,
    )


@pytest.fixture
def tiny_train():
    return TrainConfig(epsilon=0.05, epochs=2, batch_size=4, seeds=(0,), seed=0, checkpoint_every=1, steps_per_epoch=2)


@pytest.fixture
def tiny_config(tone_corpus, tmp_path, tiny_unet, tiny_disc, tiny_audionet, tiny_vocoder, tiny_train):
    """Experiment over the tone corpus: 2 train and 1 test speaker per gender."""
    root, metadata = tone_corpus
    return ExperimentConfig(
        data_root=str(root),
        metadata_path=str(metadata),
        output_dir=str(tmp_path / "outputs"),
        train_speakers_per_gender=2,
        test_speakers_per_gender=1,
        unet=tiny_unet,
        discriminator=tiny_disc,
        audionet=tiny_audionet,
        train=tiny_train,
        vocoder=tiny_vocoder,
        classifier=ClassifierConfig(epochs=25, batch_size=8, lr=0.003, min_clean_accuracy=90.0),
        epsilons=(0.05,),
        seeds=(0,),
        modes=("full", "baseline"),
    ).validate()


@pytest.fixture
def tiny_config_dict(tiny_config):
    return tiny_config.to_dict()
