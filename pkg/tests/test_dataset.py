"""
Tests for dataset loading, preparation, speaker splitting and the prepared cache.
"""

import dataclasses
import json

import numpy as np
import pytest

from helpers.audio_io import read_wav, write_wav
from helpers.tensor_cache import WAVEFORM_MAGIC, write_tensor_cache
from steps.step1_prepare_dataset import (
    AudioClip,
    DatasetSplit,
    load_dataset,
    load_metadata,
    load_prepared,
    load_prepared_cache,
    load_prepared_stats,
    parse_clip_name,
    prepare_clip,
    run_prepare,
    save_prepared_cache,
    split_speakers,
)
from utils.error_handler import (
    CacheFormatError,
    DataError,
    LabeledDataError,
    PreparationError,
    SplitError,
    WavParseError,
)


def make_clip(speaker="01", gender=1, digit=3, rate=8000, length=8192, value=0.1, repetition=0):
    return AudioClip(
        samples=np.full(length, value, dtype=np.float32),
        sample_rate=rate,
        digit=digit,
        gender=gender,
        speaker_id=speaker,
        repetition=repetition,
    )


class TestWavIO:
    """Test WAV reading and writing."""

    def test_round_trip_quantization(self, tmp_path):
        """Test 16-bit quantization error stays under one step."""
        samples = np.linspace(-0.9, 0.9, 1000).astype(np.float32)
        path = write_wav(tmp_path / "x.wav", samples, 8000)
        read, rate = read_wav(path)
        assert rate == 8000
        assert read.shape == samples.shape
        assert np.max(np.abs(read - samples)) <= 1.0 / 32768 + 1e-7

    def test_full_scale_is_clipped(self, tmp_path):
        """Test out-of-range samples are clipped."""
        path = write_wav(tmp_path / "loud.wav", np.array([2.0, -2.0], dtype=np.float32), 8000)
        read, _ = read_wav(path)
        assert read.max() <= 1.0
        assert read.min() == -1.0

    def test_malformed_header(self, tmp_path):
        """Test a broken RIFF header."""
        path = tmp_path / "broken.wav"
        path.write_bytes(b"RIFF\x00\x00garbage")
        with pytest.raises(WavParseError):
            read_wav(path)


class TestMetadata:
    """Test speaker metadata parsing."""

    def test_gender_codes(self, tone_corpus):
        """Test male is 1 and female is 0."""
        _, metadata = tone_corpus
        genders = load_metadata(metadata)
        assert genders["01"] == 1
        assert genders["02"] == 0

    def test_extra_keys_ignored(self, tmp_path):
        """Test unrelated metadata keys are ignored."""
        path = tmp_path / "meta.txt"
        path.write_text(json.dumps({"07": {"gender": "Female", "native speaker": "no", "room": "x"}}))
        assert load_metadata(path) == {"07": 0}

    def test_missing_gender(self, tmp_path):
        """Test a speaker without a gender entry."""
        path = tmp_path / "meta.txt"
        path.write_text(json.dumps({"07": {"age": "22"}}))
        with pytest.raises(LabeledDataError) as exc_info:
            load_metadata(path)
        assert exc_info.value.error_code == "BAD_GENDER_LABEL"

    def test_missing_file_has_download_hint(self, tmp_path):
        """Test the error names the corpus to download."""
        with pytest.raises(DataError) as exc_info:
            load_metadata(tmp_path / "absent.txt")
        assert "AudioMNIST" in str(exc_info.value)


class TestLoadDataset:
    """Test recursive corpus loading."""

    def test_parse_clip_name(self):
        """Test digit_speaker_repetition file names."""
        assert parse_clip_name("7_12_49.wav") == (7, "12", 49)
        assert parse_clip_name("notes.wav") is None

    def test_loads_every_recording(self, tone_corpus):
        """Test every clip is loaded in path order."""
        root, metadata = tone_corpus
        clips = load_dataset(root, metadata)
        assert len(clips) == 6 * 3 * 3
        assert all(clip.sample_rate == 16000 for clip in clips)
        assert [clip.path for clip in clips] == sorted(clip.path for clip in clips)

    def test_missing_root(self, tmp_path, tone_corpus):
        """Test a missing data root."""
        _, metadata = tone_corpus
        with pytest.raises(DataError) as exc_info:
            load_dataset(tmp_path / "nowhere", metadata)
        assert exc_info.value.error_code == "RAW_DATA_MISSING"

    def test_unknown_speaker(self, tmp_path, tone_corpus):
        """Test a speaker absent from the metadata."""
        _, metadata = tone_corpus
        write_wav(tmp_path / "99" / "1_99_0.wav", np.zeros(100, dtype=np.float32), 16000)
        with pytest.raises(LabeledDataError) as exc_info:
            load_dataset(tmp_path, metadata)
        assert exc_info.value.error_code == "MISSING_SPEAKER_METADATA"

    def test_odd_file_names_skipped(self, tmp_path, tone_corpus):
        """Test files not named like clips are skipped."""
        _, metadata = tone_corpus
        write_wav(tmp_path / "01" / "1_01_0.wav", np.zeros(100, dtype=np.float32), 16000)
        write_wav(tmp_path / "01" / "readme.wav", np.zeros(100, dtype=np.float32), 16000)
        assert len(load_dataset(tmp_path, metadata)) == 1


class TestPrepareClip:
    """Test resampling, padding and truncation."""

    def test_resample_and_pad(self):
        """Test 48 kHz half-second clip becomes 8192 samples at 8 kHz."""
        clip = make_clip(rate=48000, length=48000 // 2)
        prepared = prepare_clip(clip)
        assert prepared.sample_rate == 8000
        assert prepared.num_samples == 8192
        assert np.all(prepared.samples[4100:] == 0.0)

    def test_truncate(self):
        """Test long clips are cut to 8192 samples."""
        clip = make_clip(rate=8000, length=10000)
        prepared = prepare_clip(clip)
        assert prepared.num_samples == 8192
        np.testing.assert_array_equal(prepared.samples, clip.samples[:8192])

    def test_already_prepared_is_unchanged(self):
        """Test a prepared clip is returned as is."""
        clip = make_clip()
        assert prepare_clip(clip) is clip

    def test_exactly_one_second_at_source_rate(self):
        """Test one second is padded from 8000 to 8192 samples."""
        clip = make_clip(rate=48000, length=48000)
        prepared = prepare_clip(clip)
        assert prepared.num_samples == 8192
        assert np.all(prepared.samples[8000:] == 0.0)

    def test_resampling_overshoot_clipped(self):
        """Test resampling ringing stays inside [-1, 1]."""
        square = np.sign(np.sin(2 * np.pi * 300 * np.arange(16000) / 16000)).astype(np.float32)
        loud = AudioClip(samples=square, sample_rate=16000, digit=0, gender=0, speaker_id="01", repetition=0)
        assert np.max(np.abs(prepare_clip(loud).samples)) <= 1.0

    def test_upsampling_rejected(self):
        """Test sources below 8 kHz."""
        with pytest.raises(PreparationError) as exc_info:
            prepare_clip(make_clip(rate=4000, length=4000))
        assert exc_info.value.error_code == "UNSUPPORTED_UPSAMPLING"

    def test_samples_are_read_only(self):
        """Test clip samples cannot be written."""
        clip = make_clip()
        with pytest.raises(ValueError):
            clip.samples[0] = 1.0

    def test_caller_array_stays_writable(self):
        """Test the clip freezes a copy, not the caller's array."""
        samples = np.zeros(8192, dtype=np.float32)
        clip = AudioClip(samples=samples, sample_rate=8000, digit=0, gender=0, speaker_id="01", repetition=0)
        samples[0] = 1.0
        assert samples.flags.writeable
        assert clip.samples[0] == 0.0


class TestSplitSpeakers:
    """Test the speaker-disjoint split."""

    @pytest.fixture
    def clips(self):
        clips = []
        for index in range(8):
            speaker = f"{index:02d}"
            for digit in range(3):
                clips.append(make_clip(speaker=speaker, gender=index % 2, digit=digit))
        return clips

    def test_disjoint_and_balanced(self, clips):
        """Test no shared speakers and equal genders per side."""
        split = split_speakers(clips, seed=0, train_per_gender=2, test_per_gender=1)
        assert not split.train_speakers & split.test_speakers
        assert len(split.train_speakers) == 4
        assert len(split.test_speakers) == 2
        genders = {c.speaker_id: c.gender for c in clips}
        assert sorted(genders[s] for s in split.train_speakers) == [0, 0, 1, 1]
        assert sorted(genders[s] for s in split.test_speakers) == [0, 1]
        assert len(split.train) == 4 * 3
        assert len(split.test) == 2 * 3

    def test_deterministic(self, clips):
        """Test the split ignores input order."""
        first = split_speakers(clips, seed=5, train_per_gender=2, test_per_gender=1)
        second = split_speakers(list(reversed(clips)), seed=5, train_per_gender=2, test_per_gender=1)
        assert first.train_speakers == second.train_speakers
        assert first.test_speakers == second.test_speakers

    def test_seed_changes_split(self, clips):
        """Test different seeds give different splits."""
        splits = {split_speakers(clips, seed=seed, train_per_gender=1, test_per_gender=1).test_speakers
                  for seed in range(10)}
        assert len(splits) > 1

    def test_too_few_speakers(self, clips):
        """Test INSUFFICIENT_SPEAKERS reports the speakers needed."""
        with pytest.raises(SplitError) as exc_info:
            split_speakers(clips, seed=0, train_per_gender=4, test_per_gender=1)
        assert exc_info.value.error_code == "INSUFFICIENT_SPEAKERS"
        assert exc_info.value.details["needed_per_gender"] == 5

    def test_overlap_rejected(self):
        """Test a split sharing a speaker cannot be built."""
        with pytest.raises(SplitError):
            DatasetSplit(train=(), test=(), train_speakers=frozenset({"01"}), test_speakers=frozenset({"01"}))


class TestPreparedCache:
    """Test the prepared waveform cache."""

    def test_save_and_load(self, tmp_path):
        """Test labels and samples survive the cache."""
        clips = [make_clip(speaker="01", value=0.25, repetition=1), make_clip(speaker="02", gender=0, digit=9)]
        save_prepared_cache(clips, tmp_path, "train")
        loaded = load_prepared_cache(tmp_path, "train")
        assert [(c.speaker_id, c.digit, c.gender, c.repetition) for c in loaded] == [
            ("01", 3, 1, 1), ("02", 9, 0, 0)
        ]
        np.testing.assert_allclose(loaded[0].samples, 0.25)

    def test_manifest_mismatch(self, tmp_path):
        """Test cache rows that disagree with the manifest."""
        save_prepared_cache([make_clip()], tmp_path, "train")
        write_tensor_cache(tmp_path / "train_waveforms.bin", WAVEFORM_MAGIC, np.zeros((2, 1, 8192)))
        with pytest.raises(CacheFormatError) as exc_info:
            load_prepared_cache(tmp_path, "train")
        assert exc_info.value.error_code == "MANIFEST_MISMATCH"

    def test_mixed_lengths_rejected(self, tmp_path):
        """Test clips of different lengths."""
        with pytest.raises(PreparationError):
            save_prepared_cache([make_clip(length=8192), make_clip(length=100)], tmp_path, "train")


class TestRunPrepare:
    """Test the prepare step end to end on the tone corpus."""

    def test_builds_cache(self, tiny_config):
        """Test split sizes, spectrogram shapes and value range."""
        cache_dir, built = run_prepare(tiny_config)
        assert built
        corpus = load_prepared(tiny_config)
        assert len(corpus.split.train) == 4 * 3 * 3
        assert len(corpus.split.test) == 2 * 3 * 3
        assert corpus.train_specs.shape == (36, 80, 33)
        assert corpus.test_specs.shape == (18, 80, 33)
        assert corpus.train_specs.min() >= -1.0 and corpus.train_specs.max() <= 1.0
        assert not corpus.split.train_speakers & corpus.split.test_speakers
        assert corpus.stats == load_prepared_stats(tiny_config)
        assert all(c.num_samples == 8192 and c.sample_rate == 8000 for c in corpus.split.train)
        assert (cache_dir / "train_manifest.csv").is_file()

    def test_second_run_is_noop(self, tiny_config):
        """Test an up-to-date cache is not rewritten."""
        run_prepare(tiny_config)
        stats_file = tiny_config.output_path / "prepared" / "stats.json"
        mtime = stats_file.stat().st_mtime_ns
        _, built = run_prepare(tiny_config)
        assert not built
        assert stats_file.stat().st_mtime_ns == mtime

    def test_force_rebuilds(self, tiny_config):
        """Test force rebuilds the cache."""
        run_prepare(tiny_config)
        _, built = run_prepare(tiny_config, force=True)
        assert built

    def test_statistics_match_training_corpus(self, tiny_config):
        """Test normalized training data is centred."""
        run_prepare(tiny_config)
        corpus = load_prepared(tiny_config)
        # Clipping at three sigmas leaves the bulk of the data unclipped and centered.
        assert abs(float(corpus.train_specs.mean())) < 0.1
        assert 0.1 < float(corpus.train_specs.std()) < 0.45

    def test_load_without_prepare(self, tiny_config):
        """Test loading before prepare."""
        with pytest.raises(DataError) as exc_info:
            load_prepared(tiny_config)
        assert exc_info.value.error_code == "CACHE_MISSING"
        with pytest.raises(DataError):
            load_prepared_stats(tiny_config)

    def test_missing_raw_data(self, tiny_config, tmp_path):
        """Test prepare without the raw corpus."""
        config = dataclasses.replace(tiny_config, data_root=str(tmp_path / "absent"))
        with pytest.raises(DataError) as exc_info:
            run_prepare(config)
        assert exc_info.value.error_code == "RAW_DATA_MISSING"


if __name__ == "__main__":
    pytest.main([__file__])
