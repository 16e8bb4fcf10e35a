"""
STEP 1: PREPARE DATASET

Loads AudioMNIST-style recordings (<root>/<speaker>/<digit>_<speaker>_<rep>.wav)
with a JSON speaker metadata file, resamples to 8 kHz, pads/truncates to a
fixed length, splits speakers into disjoint gender-balanced train/test sets
and caches waveforms, manifests, normalized spectrograms and statistics.
"""

import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import gcd
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import json5
import numpy as np
from scipy.signal import resample_poly

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from helpers.audio_io import read_wav
from helpers.spectral import NormStats, compute_stats, log_mel, normalize, read_spectrogram_cache, write_spectrogram_cache
from helpers.tensor_cache import WAVEFORM_MAGIC, read_tensor_cache, write_tensor_cache
from settings.config import Config
from settings.experiment import ExperimentConfig, SpectralConfig
from utils.error_handler import CacheFormatError, DataError, LabeledDataError, PreparationError, SplitError, error_handler
from utils.file_operations import atomic_write_json, ensure_directory, file_sha256, read_csv, read_json, tree_listing_hash, write_csv
from utils.logging_utils import get_logger, log_step

logger = get_logger("dataset")

FILENAME_PATTERN = re.compile(r"^(?P<digit>\d)_(?P<speaker>[^_]+)_(?P<repetition>\d+)\.wav$")
MANIFEST_COLUMNS = ("path", "digit", "gender", "speaker_id", "repetition")
CACHE_INFO_FILE = "cache_info.json"


@dataclass(frozen=True)
class AudioClip:
    """One labeled recording. After preparation: 8 kHz, 8192 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    digit: int
    gender: int
    speaker_id: str
    repetition: int
    path: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, copy=True)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return int(self.samples.shape[0])


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[AudioClip, ...]
    test: Tuple[AudioClip, ...]
    train_speakers: FrozenSet[str] = field(default_factory=frozenset)
    test_speakers: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        overlap = self.train_speakers & self.test_speakers
        if overlap:
            raise SplitError(
                f"Speakers {sorted(overlap)} appear in both train and test",
                error_code="SPEAKER_OVERLAP",
                details={"overlap": sorted(overlap)}
            )


def load_metadata(metadata_path: Union[str, Path]) -> Dict[str, int]:
    """
    Read the speaker metadata document and map speaker_id -> gender code.

    Unknown extra keys per speaker are ignored.

    Raises:
        DataError: Missing or unreadable metadata file
        LabeledDataError: A speaker entry without a recognised gender
    """
    metadata_path = Path(metadata_path)
    if not metadata_path.is_file():
        raise DataError(
            f"Metadata file not found: {metadata_path}. {Config.DATASET_DOWNLOAD_HINT}",
            error_code="METADATA_MISSING",
            details={"metadata_path": str(metadata_path)}
        )
    try:
        document = json5.loads(metadata_path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise DataError(
            f"Could not parse metadata file {metadata_path}: {e}",
            error_code="METADATA_SYNTAX",
            details={"metadata_path": str(metadata_path)}
        )

    genders = {}
    for speaker_id, entry in document.items():
        gender = str(entry.get("gender", "") if isinstance(entry, dict) else "").strip().lower()
        if gender not in Config.GENDER_CODES:
            raise LabeledDataError(
                f"Speaker {speaker_id} has no usable gender label ({gender!r})",
                error_code="BAD_GENDER_LABEL",
                details={"speaker_id": speaker_id, "gender": gender}
            )
        genders[str(speaker_id)] = Config.GENDER_CODES[gender]
    return genders


def parse_clip_name(file_name: str) -> Optional[Tuple[int, str, int]]:
    """(digit, speaker_id, repetition) from '<digit>_<speaker>_<repetition>.wav', or None."""
    match = FILENAME_PATTERN.match(file_name)
    if not match:
        return None
    return int(match.group("digit")), match.group("speaker"), int(match.group("repetition"))


@log_step("load_dataset", "Loading raw recordings")
def load_dataset(
    root_path: Union[str, Path],
    metadata_path: Union[str, Path],
    max_workers: int = Config.MAX_CONCURRENT_OPERATIONS
) -> List[AudioClip]:
    """
    Load every WAV file under the per-speaker subdirectories of root_path.

    Sample rates are preserved; call prepare_clip afterwards. Clips are
    returned sorted by relative path.

    Raises:
        DataError: Missing root directory (with download instructions)
        LabeledDataError: A speaker has no metadata entry
        WavParseError: A file has a malformed header
    """
    root_path = Path(root_path)
    if not root_path.is_dir():
        raise DataError(
            f"Dataset directory not found: {root_path}. {Config.DATASET_DOWNLOAD_HINT}",
            error_code="RAW_DATA_MISSING",
            details={"root_path": str(root_path)}
        )
    genders = load_metadata(metadata_path)

    entries = []
    for wav_path in sorted(root_path.glob("*/*.wav")):
        parsed = parse_clip_name(wav_path.name)
        if parsed is None:
            logger.warning(f"Skipping file with unexpected name: {wav_path}")
            continue
        digit, speaker_id, repetition = parsed
        if speaker_id not in genders:
            raise LabeledDataError(
                f"No metadata entry for speaker {speaker_id} ({wav_path})",
                error_code="MISSING_SPEAKER_METADATA",
                details={"speaker_id": speaker_id, "file_path": str(wav_path)}
            )
        entries.append((wav_path, digit, speaker_id, repetition))

    if not entries:
        logger.warning(f"No recordings found under {root_path}")
        return []

    def _load(entry) -> AudioClip:
        wav_path, digit, speaker_id, repetition = entry
        samples, sample_rate = read_wav(wav_path)
        return AudioClip(
            samples=samples,
            sample_rate=sample_rate,
            digit=digit,
            gender=genders[speaker_id],
            speaker_id=speaker_id,
            repetition=repetition,
            path=wav_path.relative_to(root_path).as_posix(),
        )

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        clips = list(executor.map(_load, entries))

    rates = sorted({c.sample_rate for c in clips})
    if rates != [Config.SOURCE_SAMPLE_RATE]:
        logger.info(f"Source sample rates {rates} differ from {Config.SOURCE_SAMPLE_RATE} Hz; all clips are resampled")
    logger.info(f"Loaded {len(clips)} recordings from {len({c.speaker_id for c in clips})} speakers")
    return clips


def prepare_clip(
    clip: AudioClip,
    target_rate: int = Config.TARGET_SAMPLE_RATE,
    target_len: int = Config.TARGET_LENGTH
) -> AudioClip:
    """
    Resample to target_rate with a polyphase Kaiser-windowed low-pass, clip to
    [-1, 1], then zero-pad at the end or truncate to target_len.

    Raises:
        PreparationError: If the clip would need upsampling
    """
    if clip.sample_rate < target_rate:
        raise PreparationError(
            f"Clip {clip.path or clip.speaker_id} is sampled at {clip.sample_rate} Hz, "
            f"below the target {target_rate} Hz; upsampling is not supported",
            error_code="UNSUPPORTED_UPSAMPLING",
            details={"sample_rate": clip.sample_rate, "target_rate": target_rate, "path": clip.path}
        )
    if clip.sample_rate == target_rate and clip.num_samples == target_len:
        return clip

    samples = np.asarray(clip.samples, dtype=np.float64)
    if clip.sample_rate != target_rate:
        divisor = gcd(target_rate, clip.sample_rate)
        samples = resample_poly(
            samples,
            target_rate // divisor,
            clip.sample_rate // divisor,
            window=Config.RESAMPLE_WINDOW,
        )
    samples = np.clip(samples, -1.0, 1.0)

    if samples.shape[0] < target_len:
        samples = np.pad(samples, (0, target_len - samples.shape[0]))
    else:
        samples = samples[:target_len]

    return replace(clip, samples=samples.astype(np.float32), sample_rate=target_rate)


def prepare_clips(
    clips: Sequence[AudioClip],
    target_rate: int = Config.TARGET_SAMPLE_RATE,
    target_len: int = Config.TARGET_LENGTH,
    max_workers: int = Config.MAX_CONCURRENT_OPERATIONS
) -> List[AudioClip]:
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(lambda clip: prepare_clip(clip, target_rate, target_len), clips))


def split_speakers(
    clips: Sequence[AudioClip],
    seed: int,
    train_per_gender: int = Config.TRAIN_SPEAKERS_PER_GENDER,
    test_per_gender: int = Config.TEST_SPEAKERS_PER_GENDER
) -> DatasetSplit:
    """
    Deterministic speaker-disjoint, gender-balanced split.

    Speakers of each gender are sorted, permuted with a seeded generator and
    the first train_per_gender go to train, the next test_per_gender to test.
    Every clip of a selected speaker is used; clips order follows the input.

    Raises:
        SplitError: Too few speakers of either gender
    """
    speakers_by_gender: Dict[int, set] = {0: set(), 1: set()}
    for clip in clips:
        speakers_by_gender[clip.gender].add(clip.speaker_id)

    needed = train_per_gender + test_per_gender
    counts = {gender: len(ids) for gender, ids in speakers_by_gender.items()}
    if any(count < needed for count in counts.values()):
        raise SplitError(
            f"Need at least {needed} speakers per gender, found female={counts[0]}, male={counts[1]}",
            error_code="INSUFFICIENT_SPEAKERS",
            details={"female": counts[0], "male": counts[1], "needed_per_gender": needed}
        )

    rng = np.random.default_rng(seed)
    train_speakers, test_speakers = set(), set()
    for gender in (0, 1):
        ordered = sorted(speakers_by_gender[gender])
        chosen = [ordered[i] for i in rng.permutation(len(ordered))[:needed]]
        train_speakers.update(chosen[:train_per_gender])
        test_speakers.update(chosen[train_per_gender:])

    split = DatasetSplit(
        train=tuple(c for c in clips if c.speaker_id in train_speakers),
        test=tuple(c for c in clips if c.speaker_id in test_speakers),
        train_speakers=frozenset(train_speakers),
        test_speakers=frozenset(test_speakers),
    )
    logger.info(
        f"Split seed={seed}: {len(split.train_speakers)} train speakers / {len(split.train)} clips, "
        f"{len(split.test_speakers)} test speakers / {len(split.test)} clips"
    )
    return split


def save_prepared_cache(clips: Sequence[AudioClip], cache_dir: Union[str, Path], name: str) -> Tuple[Path, Path]:
    """Write '<name>_waveforms.bin' (count x 1 x length floats) and '<name>_manifest.csv'."""
    cache_dir = ensure_directory(cache_dir)
    lengths = {clip.num_samples for clip in clips}
    if len(lengths) > 1:
        raise PreparationError(
            f"Cannot cache clips of different lengths: {sorted(lengths)}",
            error_code="UNPREPARED_CLIPS",
            details={"lengths": sorted(lengths)}
        )
    length = lengths.pop() if lengths else 0
    data = np.stack([clip.samples for clip in clips])[:, None, :] if clips else np.zeros((0, 1, length))
    waveform_path = write_tensor_cache(cache_dir / f"{name}_waveforms.bin", WAVEFORM_MAGIC, data)
    manifest_path = write_csv(
        cache_dir / f"{name}_manifest.csv",
        MANIFEST_COLUMNS,
        ({"path": c.path, "digit": c.digit, "gender": c.gender, "speaker_id": c.speaker_id,
          "repetition": c.repetition} for c in clips),
    )
    return waveform_path, manifest_path


def load_prepared_cache(cache_dir: Union[str, Path], name: str, sample_rate: int = Config.TARGET_SAMPLE_RATE) -> List[AudioClip]:
    """Inverse of save_prepared_cache."""
    cache_dir = Path(cache_dir)
    data = read_tensor_cache(cache_dir / f"{name}_waveforms.bin", WAVEFORM_MAGIC)
    rows = read_csv(cache_dir / f"{name}_manifest.csv")
    if len(rows) != data.shape[0]:
        raise CacheFormatError(
            f"Manifest for {name} has {len(rows)} rows but the waveform cache holds {data.shape[0]} clips",
            error_code="MANIFEST_MISMATCH",
            details={"rows": len(rows), "clips": int(data.shape[0])}
        )
    return [
        AudioClip(
            samples=data[i, 0].copy(),
            sample_rate=sample_rate,
            digit=int(row["digit"]),
            gender=int(row["gender"]),
            speaker_id=row["speaker_id"],
            repetition=int(row["repetition"]),
            path=row["path"],
        )
        for i, row in enumerate(rows)
    ]


def compute_log_mels(
    clips: Sequence[AudioClip],
    cfg: SpectralConfig,
    max_workers: int = Config.MAX_CONCURRENT_OPERATIONS
) -> np.ndarray:
    """(count, n_mels, T) log-mel matrices of prepared clips."""
    if not clips:
        return np.zeros((0, cfg.n_mels, cfg.num_frames()))
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return np.stack(list(executor.map(lambda clip: log_mel(clip.samples, cfg), clips)))


def normalize_batch(logmels: np.ndarray, stats: NormStats, cfg: SpectralConfig) -> np.ndarray:
    return normalize(logmels, stats, clip_sigmas=cfg.clip_sigmas, source_rate=cfg.sample_rate).values


@dataclass
class PreparedCorpus:
    """Everything downstream stages read from the prepare cache."""

    split: DatasetSplit
    stats: NormStats
    train_specs: np.ndarray
    test_specs: np.ndarray
    cache_dir: Path

    @staticmethod
    def labels(clips: Sequence[AudioClip]) -> Tuple[np.ndarray, np.ndarray]:
        """(digits, genders) as int64 arrays."""
        return (np.array([c.digit for c in clips], dtype=np.int64),
                np.array([c.gender for c in clips], dtype=np.int64))

    @staticmethod
    def waveforms(clips: Sequence[AudioClip]) -> np.ndarray:
        return np.stack([c.samples for c in clips]).astype(np.float32)


def prepared_cache_dir(config: ExperimentConfig) -> Path:
    return config.output_path / "prepared"


def corpus_content_hash(config: ExperimentConfig) -> str:
    """Hash of the raw corpus listing, the metadata bytes and every setting that shapes the cache."""
    return tree_listing_hash(
        config.data_root,
        pattern="*/*.wav",
        extra={
            "metadata_sha256": file_sha256(config.metadata_path),
            "spectral": config.spectral.to_dict(),
            "split_seed": config.split_seed,
            "train_speakers_per_gender": config.train_speakers_per_gender,
            "test_speakers_per_gender": config.test_speakers_per_gender,
        },
    )


@error_handler("dataset", reraise=True)
@log_step("prepare", "Preparing dataset cache")
def run_prepare(config: ExperimentConfig, force: bool = False) -> Tuple[Path, bool]:
    """
    Build (or reuse) the prepared cache for an experiment.

    Returns:
        (cache directory, True if work was done / False if the cache was current)
    """
    if not Path(config.data_root).is_dir():
        raise DataError(
            f"Raw dataset not found at {config.data_root}. {Config.DATASET_DOWNLOAD_HINT}",
            error_code="RAW_DATA_MISSING",
            details={"data_root": config.data_root}
        )
    if not Path(config.metadata_path).is_file():
        raise DataError(
            f"Metadata file not found at {config.metadata_path}. {Config.DATASET_DOWNLOAD_HINT}",
            error_code="METADATA_MISSING",
            details={"metadata_path": config.metadata_path}
        )

    cache_dir = prepared_cache_dir(config)
    content_hash = corpus_content_hash(config)
    info_path = cache_dir / CACHE_INFO_FILE
    if not force and info_path.is_file():
        info = read_json(info_path)
        if info.get("content_hash") == content_hash and all((cache_dir / name).is_file() for name in info.get("files", [])):
            logger.info(f"Prepared cache in {cache_dir} is up to date, nothing to do")
            return cache_dir, False

    spectral = config.spectral
    clips = load_dataset(config.data_root, config.metadata_path)
    clips = prepare_clips(clips, spectral.sample_rate, spectral.num_samples)
    split = split_speakers(clips, config.split_seed, config.train_speakers_per_gender, config.test_speakers_per_gender)

    train_logmels = compute_log_mels(split.train, spectral)
    test_logmels = compute_log_mels(split.test, spectral)
    stats = compute_stats(train_logmels)

    files = []
    for name, subset, logmels in (("train", split.train, train_logmels), ("test", split.test, test_logmels)):
        waveform_path, manifest_path = save_prepared_cache(subset, cache_dir, name)
        spec_path = write_spectrogram_cache(cache_dir / f"{name}_spectrograms.bin", normalize_batch(logmels, stats, spectral), stats, spectral)
        files += [waveform_path.name, manifest_path.name, spec_path.name, f"{name}_spectrograms_stats.json"]

    atomic_write_json(cache_dir / "stats.json", {**stats.to_dict(), "fingerprint": stats.fingerprint(spectral)})
    files.append("stats.json")
    atomic_write_json(info_path, {
        "content_hash": content_hash,
        "files": files,
        "train_clips": len(split.train),
        "test_clips": len(split.test),
        "train_speakers": sorted(split.train_speakers),
        "test_speakers": sorted(split.test_speakers),
        "sample_rate": spectral.sample_rate,
        "num_samples": spectral.num_samples,
    })
    logger.info(f"Prepared cache written to {cache_dir}")
    return cache_dir, True


def load_prepared(config: ExperimentConfig) -> PreparedCorpus:
    """
    Load the prepared cache of an experiment.

    Raises:
        DataError: If the cache has not been built (run 'prepare' first)
    """
    cache_dir = prepared_cache_dir(config)
    info_path = cache_dir / CACHE_INFO_FILE
    if not info_path.is_file():
        raise DataError(
            f"No prepared cache in {cache_dir}; run the 'prepare' command first",
            error_code="CACHE_MISSING",
            details={"cache_dir": str(cache_dir)}
        )
    info = read_json(info_path)
    sample_rate = int(info.get("sample_rate", config.spectral.sample_rate))
    train = load_prepared_cache(cache_dir, "train", sample_rate)
    test = load_prepared_cache(cache_dir, "test", sample_rate)
    train_specs, stats = read_spectrogram_cache(cache_dir / "train_spectrograms.bin")
    test_specs, _ = read_spectrogram_cache(cache_dir / "test_spectrograms.bin")
    split = DatasetSplit(
        train=tuple(train),
        test=tuple(test),
        train_speakers=frozenset(c.speaker_id for c in train),
        test_speakers=frozenset(c.speaker_id for c in test),
    )
    return PreparedCorpus(split=split, stats=stats, train_specs=train_specs, test_specs=test_specs, cache_dir=cache_dir)


def load_prepared_stats(config: ExperimentConfig) -> NormStats:
    """Normalization statistics of the prepared training corpus."""
    path = prepared_cache_dir(config) / "stats.json"
    if not path.is_file():
        raise DataError(
            f"No normalization statistics in {path.parent}; run the 'prepare' command first",
            error_code="CACHE_MISSING",
            details={"cache_dir": str(path.parent)}
        )
    data = read_json(path)
    return NormStats(mean=float(data["mean"]), scale=float(data["scale"])).validate()
