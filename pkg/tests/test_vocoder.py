"""
Tests for the MelGAN vocoder: losses, architecture shapes, a miniature
training run, checkpoints and the inverter wrappers.
"""

import dataclasses

import numpy as np
import pytest
import torch

from helpers.melgan import MelGANGenerator, MultiScaleDiscriminator, output_length
from helpers.spectral import MelSpectrogram, NormStats, log_mel, normalize
from steps.step2_train_vocoder import (
    GriffinLimVocoder,
    LearnedVocoder,
    disc_hinge_loss,
    feature_matching_loss,
    generator_adversarial_loss,
    load_pretrained,
    save_vocoder,
    spectral_distance,
    train_vocoder,
    vocode,
    vocode_values,
)
from tests.conftest import tone
from utils.error_handler import CheckpointTypeError, CompatibilityError, ConfigurationError, DimensionError, VocoderDivergenceError


@pytest.fixture
def clips(spectral):
    """(waveforms, normalized mels, stats) for four tone clips."""
    waves = np.stack([
        tone(gender, digit, index, 0, rate=8000, seconds=8192 / 8000)
        for index, (gender, digit) in enumerate([("male", 0), ("female", 1), ("male", 2), ("female", 0)])
    ])
    logmels = np.stack([log_mel(w, spectral) for w in waves])
    stats = NormStats(float(logmels.mean()), float(logmels.std()))
    return waves, normalize(logmels, stats).values, stats


class TestLosses:
    """Test the MelGAN hinge, adversarial and feature matching losses."""

    def test_hinge_saturates(self):
        """Test the hinge is zero past the margins."""
        real = torch.full((2, 1, 5), 2.0)
        fake = torch.full((2, 1, 5), -2.0)
        assert float(disc_hinge_loss(real, fake)) == 0.0

    def test_hinge_at_zero(self):
        """Test the hinge is 2 at zero scores."""
        zeros = torch.zeros(2, 1, 5)
        assert float(disc_hinge_loss(zeros, zeros)) == pytest.approx(2.0)

    def test_hinge_shape_mismatch(self):
        """Test real and fake scores of different shape."""
        with pytest.raises(DimensionError):
            disc_hinge_loss(torch.zeros(2, 1, 5), torch.zeros(2, 1, 4))

    def test_feature_matching_of_identical_features_is_zero(self):
        """Test equal features give zero feature matching loss."""
        layers = [[torch.randn(2, 4, 8), torch.randn(2, 1, 8)], [torch.randn(2, 4, 4), torch.randn(2, 1, 4)]]
        assert float(feature_matching_loss(layers, layers)) == 0.0

    def test_feature_matching_ignores_score_map(self):
        """Test the score map is left out of feature matching."""
        real = [[torch.zeros(1, 2, 3), torch.zeros(1, 1, 3)]]
        fake = [[torch.ones(1, 2, 3), torch.full((1, 1, 3), 9.0)]]
        assert float(feature_matching_loss(real, fake)) == pytest.approx(1.0)

    def test_generator_adversarial_sums_scales(self):
        """Test the adversarial loss sums over scales."""
        outputs = [[torch.full((1, 1, 4), 0.5)], [torch.full((1, 1, 2), -1.5)]]
        assert float(generator_adversarial_loss(outputs)) == pytest.approx(-0.5 + 1.5)


class TestArchitecture:
    """Test MelGAN generator and multi-scale discriminator shapes."""

    def test_generator_output_length(self, tiny_vocoder):
        """Test T frames become hop * T samples in [-1, 1]."""
        generator = MelGANGenerator(80, tiny_vocoder).eval()
        with torch.no_grad():
            audio = generator(torch.zeros(2, 80, 33))
        assert audio.shape == (2, output_length(33, 256)) == (2, 8448)
        assert audio.abs().max() <= 1.0

    def test_generator_rejects_wrong_mels(self, tiny_vocoder):
        """Test 40 mel bands into an 80-band generator."""
        with pytest.raises(DimensionError):
            MelGANGenerator(80, tiny_vocoder)(torch.zeros(1, 40, 33))

    def test_multiscale_outputs(self, tiny_vocoder):
        """Test one feature list per scale, each scale shorter."""
        disc = MultiScaleDiscriminator(tiny_vocoder)
        outputs = disc(torch.zeros(2, 8192))
        assert len(outputs) == tiny_vocoder.num_discriminators
        # first conv, disc_layers strided convs, one wide conv, the score map
        assert all(len(layers) == tiny_vocoder.disc_layers + 3 for layers in outputs)
        assert outputs[1][0].shape[-1] < outputs[0][0].shape[-1]

    def test_hop_must_match_upsampling(self, tiny_vocoder):
        """Test upsampling factors whose product is not the hop."""
        with pytest.raises(ConfigurationError) as exc_info:
            dataclasses.replace(tiny_vocoder, upsample_factors=(8, 8, 2)).validate(hop=256)
        assert exc_info.value.error_code == "HOP_MISMATCH"


class TestTraining:
    """Test vocoder training and resume."""

    def test_miniature_run(self, clips, tiny_vocoder, spectral, tmp_path):
        """Test a four-step run records losses and spectral distances."""
        waves, mels, stats = clips
        bundle = train_vocoder(waves, mels, tiny_vocoder, spectral, stats, checkpoint_path=tmp_path / "melgan.pt")
        assert bundle.metadata["step"] == tiny_vocoder.steps
        assert len(bundle.metadata["losses"]) == tiny_vocoder.steps
        assert [p["step"] for p in bundle.metadata["evaluations"]] == [0, 2, 4]
        assert all(np.isfinite(p["spectral_distance"]) for p in bundle.metadata["evaluations"])
        assert (tmp_path / "melgan.pt").is_file()

    def test_resume_continues_step_count(self, clips, tiny_vocoder, spectral, tmp_path):
        """Test resuming continues from the stored step."""
        waves, mels, stats = clips
        path = tmp_path / "melgan.pt"
        train_vocoder(waves, mels, tiny_vocoder, spectral, stats, checkpoint_path=path)
        longer = dataclasses.replace(tiny_vocoder, steps=6)
        bundle = train_vocoder(waves, mels, longer, spectral, stats, checkpoint_path=path, resume_from=path)
        assert bundle.metadata["step"] == 6
        assert [r["step"] for r in bundle.metadata["losses"]] == list(range(1, 7))

    def test_resume_matches_straight_run(self, clips, tiny_vocoder, spectral, tmp_path):
        """Three steps, a checkpoint and three more give the loss trace of six straight steps."""
        waves, mels, stats = clips
        six = dataclasses.replace(tiny_vocoder, steps=6)
        straight = train_vocoder(waves, mels, six, spectral, stats)

        path = tmp_path / "melgan.pt"
        train_vocoder(waves, mels, dataclasses.replace(tiny_vocoder, steps=3), spectral, stats, checkpoint_path=path)
        resumed = train_vocoder(waves, mels, six, spectral, stats, resume_from=path)

        straight_losses = straight.metadata["losses"]
        resumed_losses = resumed.metadata["losses"]
        assert len(resumed_losses) == len(straight_losses) == 6
        for resumed_record, straight_record in zip(resumed_losses, straight_losses):
            assert resumed_record == pytest.approx(straight_record, abs=1e-5)

    def test_resume_with_other_stats(self, clips, tiny_vocoder, spectral, tmp_path):
        """Resuming on a corpus normalized differently is refused."""
        waves, mels, stats = clips
        path = tmp_path / "melgan.pt"
        train_vocoder(waves, mels, tiny_vocoder, spectral, stats, checkpoint_path=path)
        shifted = NormStats(stats.mean + 1.0, stats.scale)
        longer = dataclasses.replace(tiny_vocoder, steps=6)
        with pytest.raises(CompatibilityError) as exc_info:
            train_vocoder(waves, mels, longer, spectral, shifted, resume_from=path)
        assert exc_info.value.error_code == "STATS_MISMATCH"

    def test_resume_with_other_spectral_settings(self, clips, tiny_vocoder, spectral, tmp_path):
        """Test resuming with another fmax."""
        waves, mels, stats = clips
        path = tmp_path / "melgan.pt"
        train_vocoder(waves, mels, tiny_vocoder, spectral, stats, checkpoint_path=path)
        other = dataclasses.replace(spectral, fmax=3800.0)
        with pytest.raises(CompatibilityError):
            train_vocoder(waves, mels, dataclasses.replace(tiny_vocoder, steps=6), other, stats, resume_from=path)

    def test_mismatched_inputs(self, clips, tiny_vocoder, spectral):
        """Test fewer waveforms than spectrograms."""
        waves, mels, stats = clips
        with pytest.raises(DimensionError):
            train_vocoder(waves[:2], mels, tiny_vocoder, spectral, stats)

    def test_divergence(self, clips, tiny_vocoder, spectral):
        """Test losses above the threshold stop training."""
        waves, mels, stats = clips
        touchy = dataclasses.replace(tiny_vocoder, divergence_threshold=1e-9, divergence_window=2)
        with pytest.raises(VocoderDivergenceError) as exc_info:
            train_vocoder(waves, mels, touchy, spectral, stats)
        assert exc_info.value.error_code == "DIVERGED"

    def test_spectral_distance_of_identical_audio(self, clips, spectral):
        """Test the spectral distance of audio to itself."""
        waves, _, _ = clips
        assert spectral_distance(waves, waves, spectral) == 0.0


class TestCheckpoints:
    """Test vocoder checkpoints and inversion through them."""

    @pytest.fixture
    def trained(self, clips, tiny_vocoder, spectral, tmp_path):
        waves, mels, stats = clips
        path = tmp_path / "melgan.pt"
        train_vocoder(waves, mels, tiny_vocoder, spectral, stats, checkpoint_path=path)
        return path, stats, mels

    def test_load_and_vocode(self, trained, spectral):
        """Test vocode and LearnedVocoder agree on 8192 samples."""
        path, stats, mels = trained
        bundle = load_pretrained(path, spectral, stats)
        mspec = MelSpectrogram(mels[0], stats.mean, stats.scale, 8000)
        audio = vocode(mspec, bundle)
        assert audio.shape == (8192,)
        np.testing.assert_array_equal(audio, LearnedVocoder(bundle).invert(mspec))
        assert LearnedVocoder(bundle).invert_batch(mels, stats).shape == (4, 8192)

    def test_stats_mismatch_on_load(self, trained, spectral):
        """Test loading against other statistics."""
        path, stats, _ = trained
        with pytest.raises(CompatibilityError) as exc_info:
            load_pretrained(path, spectral, NormStats(stats.mean + 1.0, stats.scale))
        assert exc_info.value.error_code == "STATS_MISMATCH"

    def test_stats_mismatch_on_vocode(self, trained, spectral):
        """Test vocoding a spectrogram with other statistics."""
        path, stats, mels = trained
        bundle = load_pretrained(path)
        other = MelSpectrogram(mels[0], stats.mean, stats.scale * 2, 8000)
        with pytest.raises(CompatibilityError):
            vocode(other, bundle)

    def test_too_few_frames(self, trained):
        """31 frames at hop 256 fall short of 8192 samples."""
        path, _, mels = trained
        bundle = load_pretrained(path)
        with pytest.raises(DimensionError) as exc_info:
            vocode_values(mels[:, :, :31], bundle)
        assert exc_info.value.error_code == "TOO_FEW_FRAMES"
        assert vocode_values(mels[:, :, :32], bundle).shape == (4, 8192)

    def test_checkpoint_hash_tracks_file(self, trained):
        """Test the checkpoint hash is a sha256 hex digest."""
        path, _, _ = trained
        bundle = load_pretrained(path)
        assert len(LearnedVocoder(bundle).checkpoint_hash) == 64

    def test_wrong_kind(self, trained, tmp_path):
        """Test a vocoder checkpoint cannot load as a privacy bundle."""
        from steps.step3_train_privacy import load_privacy_bundle

        path, _, _ = trained
        with pytest.raises(CheckpointTypeError):
            load_privacy_bundle(path)

    def test_save_without_optimizers(self, trained, tmp_path):
        """Test saving a loaded bundle without optimizer state."""
        path, _, _ = trained
        bundle = load_pretrained(path)
        copy = save_vocoder(bundle, tmp_path / "copy.pt")
        assert load_pretrained(copy).metadata["step"] == bundle.metadata["step"]


class TestGriffinLimVocoder:
    """Test the Griffin-Lim fallback inverter."""

    def test_batch(self, clips, spectral):
        """Test batch inversion, the empty batch and the hash."""
        waves, mels, stats = clips
        quick = dataclasses.replace(spectral, griffin_lim_iters=2)
        vocoder = GriffinLimVocoder(quick)
        assert vocoder.invert_batch(mels[:2], stats).shape == (2, 8192)
        assert vocoder.invert_batch(mels[:0], stats).shape == (0, 8192)
        assert vocoder.checkpoint_hash == "griffin-lim:2:0"


if __name__ == "__main__":
    pytest.main([__file__])
