"""
Desk-scale trend checks on the real AudioMNIST corpus.

Slow: enabled with RUN_SLOW_TESTS=1 and AUDIOMNIST_ROOT pointing at the
directory that holds the speaker folders and audioMNIST_meta.txt.
"""

import dataclasses
import os
from pathlib import Path

import numpy as np
import pytest

from helpers.audio_io import read_wav, write_wav
from helpers.spectral import griffin_lim_invert, mel_spectrogram
from settings.experiment import load_experiment_config
from steps.step1_prepare_dataset import PreparedCorpus, load_prepared, run_prepare
from steps.step2_train_vocoder import LearnedVocoder, train_vocoder
from steps.step3_train_privacy import draw_synthetic_attributes, train, transform, transform_values
from steps.step4_evaluate import accuracy_eval, fid_audio, train_fixed_classifiers
from utils.gpu_manager import resolve_device

pytestmark = pytest.mark.slow

CONFIG_PATH = Path(__file__).parent.parent / "configs" / "desk_scale.json5"


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = os.getenv("AUDIOMNIST_ROOT")
    if not root or not Path(root).is_dir():
        pytest.skip("AUDIOMNIST_ROOT is not set")
    config = load_experiment_config(CONFIG_PATH, output_dir_override=str(tmp_path_factory.mktemp("desk")))
    config = dataclasses.replace(config, data_root=root, metadata_path=str(Path(root) / "audioMNIST_meta.txt")).validate()
    run_prepare(config)
    return config, load_prepared(config), resolve_device("auto")


@pytest.fixture(scope="module")
def classifiers(desk):
    config, corpus, device = desk
    return train_fixed_classifiers(corpus, config, device=device, save=False)


@pytest.fixture(scope="module")
def vocoder_bundle(desk):
    config, corpus, device = desk
    return train_vocoder(PreparedCorpus.waveforms(corpus.split.train), corpus.train_specs,
                         config.vocoder, config.spectral, corpus.stats, device=device)


def train_cell(desk, seed, mode):
    config, corpus, device = desk
    _, genders = PreparedCorpus.labels(corpus.split.train)
    cfg = config.train.for_cell(0.05, seed, mode)
    bundle, _ = train(corpus.train_specs, genders, cfg, config.spectral, config.unet, config.discriminator, device=device)
    return bundle


@pytest.fixture(scope="module")
def full_bundle(desk):
    return train_cell(desk, 0, "full")


def transformed_test_set(desk, bundle, seed):
    _, corpus, device = desk
    s_syn = draw_synthetic_attributes(len(corpus.split.test), seed)
    m_prime, m_dprime = transform_values(corpus.test_specs, bundle, s_syn=s_syn, seed=seed, device=device)
    return m_dprime if m_dprime is not None else m_prime


def test_gender_hidden_digits_kept(desk, classifiers, full_bundle):
    """The full model drops gender accuracy by 20 points and keeps digits above 40%."""
    _, corpus, _ = desk
    digits, genders = PreparedCorpus.labels(corpus.split.test)
    gender_clf = classifiers[("gender", "spectrogram")]
    assert gender_clf.clean_accuracy >= 90.0

    final = transformed_test_set(desk, full_bundle, 0)
    assert gender_clf.clean_accuracy - accuracy_eval(gender_clf, final, genders) >= 20.0
    assert accuracy_eval(classifiers[("digit", "spectrogram")], final, digits) >= 40.0


def test_full_more_realistic_than_baseline(desk, classifiers, vocoder_bundle):
    """Full mode has lower audio FID than the baseline in at least two of three seeds."""
    _, corpus, _ = desk
    vocoder = LearnedVocoder(vocoder_bundle)
    reference = PreparedCorpus.waveforms(corpus.split.test)
    audio_clf = classifiers[("digit", "audio")]

    wins = 0
    for seed in range(3):
        fids = {}
        for mode in ("full", "baseline"):
            final = transformed_test_set(desk, train_cell(desk, seed, mode), seed)
            fids[mode] = fid_audio(reference, vocoder.invert_batch(final, corpus.stats), audio_clf)
        wins += fids["full"] <= fids["baseline"]
    assert wins >= 2


def test_griffin_lim_converges_on_speech(desk):
    """Spectral convergence on recorded digits ends below 0.25."""
    config, corpus, _ = desk
    for clip in corpus.split.test[:5]:
        mspec = mel_spectrogram(clip.samples, corpus.stats, config.spectral)
        _, history = griffin_lim_invert(mspec, config.spectral, return_history=True)
        assert history[-1] < history[0]
        assert history[-1] < 0.25


def test_vocoder_spectral_distance_falls(vocoder_bundle):
    """The vocoder's spectral distance falls over training."""
    distances = [entry["spectral_distance"] for entry in vocoder_bundle.metadata["evaluations"]]
    quarter = max(1, len(distances) // 4)
    assert np.mean(distances[:quarter]) > np.mean(distances[-quarter:])


def test_attribute_changes_transform(desk, full_bundle, tmp_path):
    """Flipping s' changes the transformed spectrogram and writes valid audio."""
    config, corpus, device = desk
    clip = corpus.split.test[0]
    zero = transform(clip, full_bundle, corpus.stats, config.spectral, s_syn=0, seed=1, device=device)
    one = transform(clip, full_bundle, corpus.stats, config.spectral, s_syn=1, seed=1, device=device)
    assert np.mean(np.abs(zero.m_dprime.values - one.m_dprime.values)) > 0.001

    samples, rate = read_wav(write_wav(tmp_path / "out.wav", one.waveform, config.spectral.sample_rate))
    assert rate == 8000
    assert samples.shape == (8192,)


if __name__ == "__main__":
    pytest.main([__file__])
