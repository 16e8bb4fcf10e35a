"""
Typed experiment configuration.

Frozen dataclasses defaulted from Config, plus the loader for sectioned
json5 experiment files:

    {
      paths: {data_root: "...", metadata_path: "...", output_dir: "..."},
      spectral: {...}, unet: {...}, discriminator: {...}, audionet: {...},
      train: {...}, vocoder: {...}, classifier: {...},
      grid: {epsilons: [...], seeds: [...], modes: [...]},
    }
"""

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

import json5

from settings.config import Config
from utils.error_handler import ConfigurationError
from utils.validation_utils import (
    validate_choice,
    validate_file_path_input,
    validate_int_input,
    validate_int_sequence,
    validate_numeric_input,
)

T = TypeVar("T")

MODES = ("full", "baseline")
GENERATOR_TARGETS = ("synthetic", "original", "fake")
VOCODER_CORPORA = ("train_split", "all")


def _from_dict(cls: Type[T], data: Optional[Dict[str, Any]], section: str) -> T:
    data = dict(data or {})
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(
            f"Unknown keys in [{section}]: {unknown}",
            error_code="UNKNOWN_CONFIG_KEYS",
            details={"section": section, "unknown": unknown, "allowed": sorted(known)}
        )
    for name, value in list(data.items()):
        if isinstance(value, list):
            data[name] = tuple(value)
        elif isinstance(known[name].default, float) and isinstance(value, int) and not isinstance(value, bool):
            # 0 and 0.0 must fingerprint the same
            data[name] = float(value)
    instance = cls(**data)
    instance.validate()
    return instance


def _to_dict(instance: Any) -> Dict[str, Any]:
    return {key: list(value) if isinstance(value, tuple) else value
            for key, value in dataclasses.asdict(instance).items()}


@dataclass(frozen=True)
class SpectralConfig:
    sample_rate: int = Config.TARGET_SAMPLE_RATE
    window_size: int = Config.STFT_WINDOW_SIZE
    hop: int = Config.STFT_HOP
    n_mels: int = Config.N_MELS
    fmin: float = Config.MEL_FMIN
    fmax: float = Config.MEL_FMAX
    log_floor: float = Config.LOG_FLOOR
    clip_sigmas: float = Config.CLIP_SIGMAS
    griffin_lim_iters: int = Config.GRIFFIN_LIM_ITERS
    griffin_lim_momentum: float = Config.GRIFFIN_LIM_MOMENTUM
    griffin_lim_seed: int = Config.GRIFFIN_LIM_SEED
    num_samples: int = Config.TARGET_LENGTH

    @property
    def n_freqs(self) -> int:
        return self.window_size // 2 + 1

    def num_frames(self, num_samples: Optional[int] = None) -> int:
        """Frame count with centered framing: 1 + floor(num_samples / hop)."""
        return 1 + (self.num_samples if num_samples is None else num_samples) // self.hop

    def validate(self) -> "SpectralConfig":
        validate_int_input(self.sample_rate, "spectral.sample_rate", min_value=1)
        validate_int_input(self.window_size, "spectral.window_size", min_value=2)
        validate_int_input(self.hop, "spectral.hop", min_value=1)
        if not self.window_size > self.hop > 0:
            raise ConfigurationError(
                f"Need window_size > hop > 0, got window_size={self.window_size}, hop={self.hop}",
                error_code="INVALID_FRAMING",
                details={"window_size": self.window_size, "hop": self.hop}
            )
        validate_int_input(self.n_mels, "spectral.n_mels", min_value=1)
        if self.n_mels > self.n_freqs:
            raise ConfigurationError(
                f"n_mels={self.n_mels} exceeds window_size/2+1={self.n_freqs}",
                error_code="TOO_MANY_MELS",
                details={"n_mels": self.n_mels, "n_freqs": self.n_freqs}
            )
        validate_numeric_input(self.fmin, "spectral.fmin", allow_negative=False)
        validate_numeric_input(self.fmax, "spectral.fmax", min_value=self.fmin, max_value=self.sample_rate / 2)
        validate_numeric_input(self.log_floor, "spectral.log_floor", allow_negative=False, allow_zero=False)
        validate_numeric_input(self.clip_sigmas, "spectral.clip_sigmas", allow_negative=False, allow_zero=False)
        validate_int_input(self.griffin_lim_iters, "spectral.griffin_lim_iters", min_value=1)
        validate_numeric_input(self.griffin_lim_momentum, "spectral.griffin_lim_momentum", min_value=0.0, max_value=1.0)
        validate_int_input(self.num_samples, "spectral.num_samples", min_value=self.window_size)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SpectralConfig":
        return _from_dict(cls, data, "spectral")


@dataclass(frozen=True)
class UNetConfig:
    depth: int = Config.UNET_DEPTH
    base_channels: int = Config.UNET_BASE_CHANNELS
    out_channels: int = 1
    leaky_slope: float = Config.UNET_LEAKY_SLOPE

    @property
    def multiple(self) -> int:
        return 2 ** self.depth

    def validate(self) -> "UNetConfig":
        validate_int_input(self.depth, "unet.depth", min_value=1)
        validate_int_input(self.base_channels, "unet.base_channels", min_value=1)
        validate_int_input(self.out_channels, "unet.out_channels", min_value=1)
        validate_numeric_input(self.leaky_slope, "unet.leaky_slope", min_value=0.0, max_value=1.0)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "UNetConfig":
        return _from_dict(cls, data, "unet")


@dataclass(frozen=True)
class DiscriminatorConfig:
    channels: Tuple[int, ...] = Config.DISC_CHANNELS
    hidden: int = Config.DISC_HIDDEN
    dropout: float = Config.DISC_DROPOUT
    pool_output: Tuple[int, ...] = Config.DISC_POOL_OUTPUT

    def validate(self) -> "DiscriminatorConfig":
        validate_int_sequence(self.channels, "discriminator.channels", min_items=5, min_value=1)
        if len(self.channels) != 5:
            raise ConfigurationError(
                "discriminator.channels must list exactly 5 convolution widths",
                error_code="INVALID_ARCHITECTURE",
                details={"channels": list(self.channels)}
            )
        validate_int_input(self.hidden, "discriminator.hidden", min_value=1)
        validate_numeric_input(self.dropout, "discriminator.dropout", min_value=0.0, max_value=0.99)
        validate_int_sequence(self.pool_output, "discriminator.pool_output", min_items=2, min_value=1)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "DiscriminatorConfig":
        return _from_dict(cls, data, "discriminator")


@dataclass(frozen=True)
class AudioNetConfig:
    channels: Tuple[int, ...] = Config.AUDIONET_CHANNELS
    pool: int = Config.AUDIONET_POOL
    hidden: int = Config.AUDIONET_HIDDEN
    dropout: float = Config.AUDIONET_DROPOUT
    input_length: int = Config.TARGET_LENGTH

    @property
    def embedding_dim(self) -> int:
        length = self.input_length
        for _ in self.channels:
            length //= self.pool
        return self.channels[-1] * length

    def validate(self) -> "AudioNetConfig":
        validate_int_sequence(self.channels, "audionet.channels", min_items=1, min_value=1)
        validate_int_input(self.pool, "audionet.pool", min_value=1)
        validate_int_input(self.hidden, "audionet.hidden", min_value=1)
        validate_numeric_input(self.dropout, "audionet.dropout", min_value=0.0, max_value=0.99)
        validate_int_input(self.input_length, "audionet.input_length", min_value=1)
        if self.embedding_dim < 1:
            raise ConfigurationError(
                "audionet pooling reduces the input to nothing",
                error_code="INVALID_ARCHITECTURE",
                details={"channels": list(self.channels), "pool": self.pool, "input_length": self.input_length}
            )
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "AudioNetConfig":
        return _from_dict(cls, data, "audionet")


@dataclass(frozen=True)
class TrainConfig:
    lr_filter: float = Config.LR_FILTER
    lr_generator: float = Config.LR_GENERATOR
    lr_disc_filter: float = Config.LR_DISC_FILTER
    lr_disc_gen: float = Config.LR_DISC_GENERATOR
    adam_beta1: float = Config.ADAM_BETAS[0]
    adam_beta2: float = Config.ADAM_BETAS[1]
    lambda_penalty: float = Config.LAMBDA_PENALTY
    epsilon: float = Config.EPSILON_GRID[1]
    epochs: int = Config.EPOCHS
    batch_size: int = Config.BATCH_SIZE
    seeds: Tuple[int, ...] = Config.SEEDS
    seed: int = Config.SEEDS[0]
    mode: str = "full"
    generator_target: str = Config.GENERATOR_TARGET
    checkpoint_every: int = Config.CHECKPOINT_EVERY_EPOCHS
    steps_per_epoch: Optional[int] = None

    @property
    def betas(self) -> Tuple[float, float]:
        return (self.adam_beta1, self.adam_beta2)

    def validate(self) -> "TrainConfig":
        for name in ("lr_filter", "lr_generator", "lr_disc_filter", "lr_disc_gen"):
            validate_numeric_input(getattr(self, name), f"train.{name}", allow_negative=False, allow_zero=False)
        validate_numeric_input(self.adam_beta1, "train.adam_beta1", min_value=0.0, max_value=0.999999)
        validate_numeric_input(self.adam_beta2, "train.adam_beta2", min_value=0.0, max_value=0.999999)
        validate_numeric_input(self.lambda_penalty, "train.lambda_penalty", allow_negative=False, allow_zero=False)
        validate_numeric_input(self.epsilon, "train.epsilon", allow_negative=False, allow_zero=False)
        validate_int_input(self.epochs, "train.epochs", min_value=1)
        validate_int_input(self.batch_size, "train.batch_size", min_value=2)
        validate_int_sequence(self.seeds, "train.seeds", min_items=1, min_value=0)
        validate_int_input(self.seed, "train.seed", min_value=0)
        validate_choice(self.mode, "train.mode", MODES)
        validate_choice(self.generator_target, "train.generator_target", GENERATOR_TARGETS)
        validate_int_input(self.checkpoint_every, "train.checkpoint_every", min_value=1)
        if self.steps_per_epoch is not None:
            validate_int_input(self.steps_per_epoch, "train.steps_per_epoch", min_value=1)
        return self

    def for_cell(self, epsilon: float, seed: int, mode: str) -> "TrainConfig":
        """Config of one (epsilon, seed, mode) grid cell."""
        return dataclasses.replace(self, epsilon=float(epsilon), seed=int(seed), mode=mode).validate()

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "TrainConfig":
        return _from_dict(cls, data, "train")


@dataclass(frozen=True)
class VocoderConfig:
    upsample_factors: Tuple[int, ...] = Config.VOCODER_UPSAMPLE_FACTORS
    ngf: int = Config.VOCODER_NGF
    n_residual_layers: int = Config.VOCODER_RESIDUAL_LAYERS
    num_discriminators: int = Config.VOCODER_NUM_DISCRIMINATORS
    disc_downsample_factor: int = Config.VOCODER_DISC_DOWNSAMPLE
    ndf: int = Config.VOCODER_NDF
    disc_layers: int = Config.VOCODER_DISC_LAYERS
    disc_stride: int = Config.VOCODER_DISC_STRIDE
    disc_max_channels: int = Config.VOCODER_DISC_MAX_CHANNELS
    feature_match_weight: float = Config.VOCODER_FEATURE_MATCH_WEIGHT
    lr: float = Config.VOCODER_LR
    adam_beta1: float = Config.ADAM_BETAS[0]
    adam_beta2: float = Config.ADAM_BETAS[1]
    batch_size: int = Config.VOCODER_BATCH_SIZE
    steps: int = Config.VOCODER_STEPS
    eval_every: int = Config.VOCODER_EVAL_EVERY
    divergence_threshold: float = Config.VOCODER_DIVERGENCE_THRESHOLD
    divergence_window: int = Config.VOCODER_DIVERGENCE_WINDOW
    seed: int = 0
    corpus: str = "train_split"

    @property
    def hop(self) -> int:
        return int(math.prod(self.upsample_factors))

    @property
    def betas(self) -> Tuple[float, float]:
        return (self.adam_beta1, self.adam_beta2)

    def validate(self, hop: Optional[int] = None) -> "VocoderConfig":
        validate_int_sequence(self.upsample_factors, "vocoder.upsample_factors", min_items=1, min_value=1)
        if hop is not None and self.hop != hop:
            raise ConfigurationError(
                f"Product of vocoder.upsample_factors ({self.hop}) must equal the STFT hop ({hop})",
                error_code="HOP_MISMATCH",
                details={"upsample_factors": list(self.upsample_factors), "hop": hop}
            )
        validate_int_input(self.ngf, "vocoder.ngf", min_value=1)
        validate_int_input(self.n_residual_layers, "vocoder.n_residual_layers", min_value=0)
        validate_int_input(self.num_discriminators, "vocoder.num_discriminators", min_value=1)
        validate_int_input(self.disc_downsample_factor, "vocoder.disc_downsample_factor", min_value=1)
        validate_int_input(self.ndf, "vocoder.ndf", min_value=4)
        if self.ndf % 4:
            raise ConfigurationError(
                "vocoder.ndf must be a multiple of 4 (grouped convolutions)",
                error_code="INVALID_ARCHITECTURE",
                details={"ndf": self.ndf}
            )
        validate_int_input(self.disc_layers, "vocoder.disc_layers", min_value=1)
        validate_int_input(self.disc_stride, "vocoder.disc_stride", min_value=1)
        validate_int_input(self.disc_max_channels, "vocoder.disc_max_channels", min_value=self.ndf)
        validate_numeric_input(self.feature_match_weight, "vocoder.feature_match_weight", allow_negative=False)
        validate_numeric_input(self.lr, "vocoder.lr", allow_negative=False, allow_zero=False)
        validate_int_input(self.batch_size, "vocoder.batch_size", min_value=1)
        validate_int_input(self.steps, "vocoder.steps", min_value=1)
        validate_int_input(self.eval_every, "vocoder.eval_every", min_value=1)
        validate_numeric_input(self.divergence_threshold, "vocoder.divergence_threshold", allow_negative=False, allow_zero=False)
        validate_int_input(self.divergence_window, "vocoder.divergence_window", min_value=1)
        validate_int_input(self.seed, "vocoder.seed", min_value=0)
        validate_choice(self.corpus, "vocoder.corpus", VOCODER_CORPORA)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "VocoderConfig":
        return _from_dict(cls, data, "vocoder")


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = Config.CLASSIFIER_EPOCHS
    batch_size: int = Config.CLASSIFIER_BATCH_SIZE
    lr: float = Config.CLASSIFIER_LR
    min_clean_accuracy: float = Config.CLASSIFIER_MIN_CLEAN_ACCURACY
    fid_shrinkage: float = Config.FID_SHRINKAGE
    seed: int = 0

    def validate(self) -> "ClassifierConfig":
        validate_int_input(self.epochs, "classifier.epochs", min_value=1)
        validate_int_input(self.batch_size, "classifier.batch_size", min_value=1)
        validate_numeric_input(self.lr, "classifier.lr", allow_negative=False, allow_zero=False)
        validate_numeric_input(self.min_clean_accuracy, "classifier.min_clean_accuracy", min_value=0.0, max_value=100.0)
        validate_numeric_input(self.fid_shrinkage, "classifier.fid_shrinkage", allow_negative=False)
        validate_int_input(self.seed, "classifier.seed", min_value=0)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ClassifierConfig":
        return _from_dict(cls, data, "classifier")


@dataclass(frozen=True)
class ExperimentConfig:
    data_root: str = ""
    metadata_path: str = ""
    output_dir: str = Config.OUTPUT_DIR
    train_speakers_per_gender: int = Config.TRAIN_SPEAKERS_PER_GENDER
    test_speakers_per_gender: int = Config.TEST_SPEAKERS_PER_GENDER
    split_seed: int = Config.SPLIT_SEED
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    unet: UNetConfig = field(default_factory=UNetConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    audionet: AudioNetConfig = field(default_factory=AudioNetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    epsilons: Tuple[float, ...] = Config.EPSILON_GRID
    seeds: Tuple[int, ...] = Config.SEEDS
    modes: Tuple[str, ...] = Config.MODES

    @property
    def grid(self) -> Tuple[Tuple[float, int, str], ...]:
        return tuple((eps, seed, mode) for eps in self.epsilons for seed in self.seeds for mode in self.modes)

    def validate(self, check_paths: bool = False) -> "ExperimentConfig":
        self.spectral.validate()
        self.unet.validate()
        self.discriminator.validate()
        self.audionet.validate()
        self.train.validate()
        self.vocoder.validate(hop=self.spectral.hop)
        self.classifier.validate()
        if self.audionet.input_length != self.spectral.num_samples:
            raise ConfigurationError(
                "audionet.input_length must equal spectral.num_samples",
                error_code="LENGTH_MISMATCH",
                details={"audionet": self.audionet.input_length, "spectral": self.spectral.num_samples}
            )
        validate_int_input(self.train_speakers_per_gender, "paths.train_speakers_per_gender", min_value=1)
        validate_int_input(self.test_speakers_per_gender, "paths.test_speakers_per_gender", min_value=1)
        validate_int_input(self.split_seed, "paths.split_seed", min_value=0)
        if not self.epsilons or not self.seeds or not self.modes:
            raise ConfigurationError(
                "Experiment grid must be non-empty",
                error_code="EMPTY_GRID",
                details={"epsilons": list(self.epsilons), "seeds": list(self.seeds), "modes": list(self.modes)}
            )
        for eps in self.epsilons:
            validate_numeric_input(eps, "grid.epsilons", allow_negative=False, allow_zero=False)
        validate_int_sequence(self.seeds, "grid.seeds", min_value=0)
        for mode in self.modes:
            validate_choice(mode, "grid.modes", MODES)
        if check_paths:
            validate_file_path_input(self.data_root, "paths.data_root", must_be_file=False, must_be_directory=True)
            validate_file_path_input(self.metadata_path, "paths.metadata_path")
        return self

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "paths": {
                "data_root": self.data_root,
                "metadata_path": self.metadata_path,
                "output_dir": self.output_dir,
                "train_speakers_per_gender": self.train_speakers_per_gender,
                "test_speakers_per_gender": self.test_speakers_per_gender,
                "split_seed": self.split_seed,
            },
            "spectral": self.spectral.to_dict(),
            "unet": self.unet.to_dict(),
            "discriminator": self.discriminator.to_dict(),
            "audionet": self.audionet.to_dict(),
            "train": self.train.to_dict(),
            "vocoder": self.vocoder.to_dict(),
            "classifier": self.classifier.to_dict(),
            "grid": {
                "epsilons": list(self.epsilons),
                "seeds": list(self.seeds),
                "modes": list(self.modes),
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        sections = {"paths", "spectral", "unet", "discriminator", "audionet", "train", "vocoder", "classifier", "grid"}
        unknown = sorted(set(data) - sections)
        if unknown:
            raise ConfigurationError(
                f"Unknown config sections: {unknown}",
                error_code="UNKNOWN_CONFIG_SECTIONS",
                details={"unknown": unknown, "allowed": sorted(sections)}
            )
        paths = dict(data.get("paths") or {})
        allowed_paths = {"data_root", "metadata_path", "output_dir", "train_speakers_per_gender",
                         "test_speakers_per_gender", "split_seed"}
        unknown_paths = sorted(set(paths) - allowed_paths)
        if unknown_paths:
            raise ConfigurationError(
                f"Unknown keys in [paths]: {unknown_paths}",
                error_code="UNKNOWN_CONFIG_KEYS",
                details={"section": "paths", "unknown": unknown_paths}
            )
        grid = dict(data.get("grid") or {})
        unknown_grid = sorted(set(grid) - {"epsilons", "seeds", "modes"})
        if unknown_grid:
            raise ConfigurationError(
                f"Unknown keys in [grid]: {unknown_grid}",
                error_code="UNKNOWN_CONFIG_KEYS",
                details={"section": "grid", "unknown": unknown_grid}
            )
        config = cls(
            data_root=str(paths.get("data_root", "")),
            metadata_path=str(paths.get("metadata_path", "")),
            output_dir=str(paths.get("output_dir", Config.OUTPUT_DIR)),
            train_speakers_per_gender=paths.get("train_speakers_per_gender", Config.TRAIN_SPEAKERS_PER_GENDER),
            test_speakers_per_gender=paths.get("test_speakers_per_gender", Config.TEST_SPEAKERS_PER_GENDER),
            split_seed=paths.get("split_seed", Config.SPLIT_SEED),
            spectral=SpectralConfig.from_dict(data.get("spectral")),
            unet=UNetConfig.from_dict(data.get("unet")),
            discriminator=DiscriminatorConfig.from_dict(data.get("discriminator")),
            audionet=AudioNetConfig.from_dict(data.get("audionet")),
            train=TrainConfig.from_dict(data.get("train")),
            vocoder=VocoderConfig.from_dict(data.get("vocoder")),
            classifier=ClassifierConfig.from_dict(data.get("classifier")),
            epsilons=tuple(float(e) for e in grid.get("epsilons", Config.EPSILON_GRID)),
            seeds=tuple(grid.get("seeds", Config.SEEDS)),
            modes=tuple(grid.get("modes", Config.MODES)),
        )
        return config.validate()

    def fingerprint(self) -> str:
        """Stable hash of the full configuration."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()


def load_experiment_config(path: Union[str, Path], output_dir_override: Optional[str] = None) -> ExperimentConfig:
    """
    Load and validate a sectioned json5 experiment file.

    Args:
        path: Config file path
        output_dir_override: Replaces paths.output_dir (environment/CLI override)

    Raises:
        ConfigurationError: Missing file, syntax errors, unknown keys or invalid values
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(
            f"Config file not found: {path}",
            error_code="CONFIG_NOT_FOUND",
            details={"path": str(path)}
        )
    try:
        data = json5.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigurationError(
            f"Could not parse config file {path}: {e}",
            error_code="CONFIG_SYNTAX",
            details={"path": str(path)}
        )
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"Config file {path} must contain a top-level object",
            error_code="CONFIG_SYNTAX",
            details={"path": str(path)}
        )
    if output_dir_override:
        data.setdefault("paths", {})
        data["paths"]["output_dir"] = output_dir_override
    return ExperimentConfig.from_dict(data)
