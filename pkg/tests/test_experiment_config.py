"""
Tests for the typed experiment configuration and its json5 loader.
"""

import dataclasses
from pathlib import Path

import pytest

from settings.experiment import (
    AudioNetConfig,
    ExperimentConfig,
    SpectralConfig,
    TrainConfig,
    VocoderConfig,
    load_experiment_config,
)
from utils.error_handler import ConfigurationError

CONFIG_DIR = Path(__file__).parent.parent / "configs"


class TestShippedConfigs:
    """The experiment files under configs/."""

    @pytest.mark.parametrize("name", ["desk_scale.json5", "full_scale.json5"])
    def test_loads(self, name):
        """Test each shipped file loads and describes 33 frames."""
        config = load_experiment_config(CONFIG_DIR / name)
        assert config.spectral.num_frames() == 33
        assert len(config.grid) == len(config.epsilons) * len(config.seeds) * len(config.modes)


class TestRoundTrip:
    """Serialization of ExperimentConfig."""

    def test_to_dict_and_back(self, tiny_config):
        """Test to_dict and from_dict give an equal config and fingerprint."""
        again = ExperimentConfig.from_dict(tiny_config.to_dict())
        assert again == tiny_config
        assert again.fingerprint() == tiny_config.fingerprint()

    def test_fingerprint_tracks_values(self, tiny_config):
        """Test any changed value changes the fingerprint."""
        other = dataclasses.replace(tiny_config, split_seed=7)
        assert other.fingerprint() != tiny_config.fingerprint()

    def test_integer_written_for_float(self):
        """Test integer literals are coerced to float fields."""
        config = ExperimentConfig.from_dict({"train": {"epsilon": 1, "lambda_penalty": 10}})
        assert isinstance(config.train.epsilon, float)
        assert config.train == dataclasses.replace(TrainConfig(), epsilon=1.0, lambda_penalty=10.0)

    def test_lists_become_tuples(self):
        """Test json lists are stored as tuples."""
        config = ExperimentConfig.from_dict({"discriminator": {"channels": [8, 8, 8, 8, 8]}})
        assert config.discriminator.channels == (8, 8, 8, 8, 8)


class TestValidation:
    """Test configuration validation."""

    def test_unknown_section(self):
        """Test unknown top-level sections."""
        with pytest.raises(ConfigurationError) as exc_info:
            ExperimentConfig.from_dict({"optimizer": {}})
        assert exc_info.value.error_code == "UNKNOWN_CONFIG_SECTIONS"

    def test_unknown_key(self):
        """Test unknown keys name their section."""
        with pytest.raises(ConfigurationError) as exc_info:
            ExperimentConfig.from_dict({"train": {"learning_rate": 0.1}})
        assert exc_info.value.error_code == "UNKNOWN_CONFIG_KEYS"
        assert exc_info.value.details["section"] == "train"

    def test_unknown_grid_key(self):
        """Test unknown grid keys."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"grid": {"lambdas": [1]}})

    def test_audio_length_must_match(self):
        """Test AudioNet input length must equal the clip length."""
        with pytest.raises(ConfigurationError) as exc_info:
            ExperimentConfig(audionet=AudioNetConfig(input_length=4096)).validate()
        assert exc_info.value.error_code == "LENGTH_MISMATCH"

    def test_empty_grid(self):
        """Test an empty seed list."""
        with pytest.raises(ConfigurationError) as exc_info:
            ExperimentConfig(seeds=()).validate()
        assert exc_info.value.error_code == "EMPTY_GRID"

    def test_bad_mode(self):
        """Test modes other than full and baseline."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(modes=("full", "partial")).validate()

    def test_non_positive_epsilon(self):
        """Test epsilon must be positive."""
        with pytest.raises(ConfigurationError):
            TrainConfig(epsilon=0.0).validate()

    def test_generator_target_choice(self):
        """Test generator_target choices."""
        with pytest.raises(ConfigurationError):
            TrainConfig(generator_target="random").validate()

    def test_vocoder_hop(self):
        """Test vocoder upsampling must equal the STFT hop."""
        with pytest.raises(ConfigurationError) as exc_info:
            VocoderConfig().validate(hop=128)
        assert exc_info.value.error_code == "HOP_MISMATCH"

    def test_window_must_cover_hop(self):
        """Test the window cannot be shorter than the hop."""
        with pytest.raises(ConfigurationError):
            SpectralConfig(window_size=128, hop=256).validate()

    def test_paths_checked_on_request(self, tmp_path):
        """Test data paths are only checked when asked."""
        config = ExperimentConfig(data_root=str(tmp_path / "absent"), metadata_path=str(tmp_path / "meta.txt"))
        config.validate()
        with pytest.raises(ConfigurationError):
            config.validate(check_paths=True)


class TestGrid:
    """Test the epsilon x seed x mode grid."""

    def test_cells(self):
        """Test grid size and order."""
        config = ExperimentConfig(epsilons=(0.01, 0.05), seeds=(0, 1, 2), modes=("full",))
        assert len(config.grid) == 6
        assert config.grid[0] == (0.01, 0, "full")

    def test_for_cell(self):
        """Test for_cell sets epsilon, seed and mode."""
        cfg = TrainConfig().for_cell(0.1, 3, "baseline")
        assert (cfg.epsilon, cfg.seed, cfg.mode) == (0.1, 3, "baseline")

    def test_for_cell_validates(self):
        """Test for_cell rejects an unknown mode."""
        with pytest.raises(ConfigurationError):
            TrainConfig().for_cell(0.1, 0, "partial")


class TestLoader:
    """Test the json5 loader."""

    def test_missing_file(self, tmp_path):
        """Test missing experiment file."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_experiment_config(tmp_path / "absent.json5")
        assert exc_info.value.error_code == "CONFIG_NOT_FOUND"

    def test_syntax_error(self, tmp_path):
        """Test malformed json5."""
        path = tmp_path / "broken.json5"
        path.write_text("{ train: { epochs: }")
        with pytest.raises(ConfigurationError) as exc_info:
            load_experiment_config(path)
        assert exc_info.value.error_code == "CONFIG_SYNTAX"

    def test_top_level_must_be_object(self, tmp_path):
        """Test a top-level list is rejected."""
        path = tmp_path / "list.json5"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigurationError) as exc_info:
            load_experiment_config(path)
        assert exc_info.value.error_code == "CONFIG_SYNTAX"

    def test_json5_comments_and_override(self, tmp_path):
        """Test comments, trailing commas and the output dir override."""
        path = tmp_path / "exp.json5"
        path.write_text("// tiny\n{ train: { epochs: 3, }, grid: { seeds: [1] } }")
        config = load_experiment_config(path, output_dir_override=str(tmp_path / "out"))
        assert config.train.epochs == 3
        assert config.seeds == (1,)
        assert config.output_path == tmp_path / "out"


if __name__ == "__main__":
    pytest.main([__file__])
