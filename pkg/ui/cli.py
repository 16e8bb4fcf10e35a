"""
COMMAND LINE

    prepare            decode, resample and split the corpus; write caches and stats
    train-vocoder      train the MelGAN vocoder on the prepared corpus
    train-classifiers  train the fixed digit/gender classifiers
    train              privacy training over the (epsilon x seed x mode) grid
    transform          transform WAV files with a trained checkpoint
    evaluate           score finished runs in both domains and write the report
    report             rebuild the aggregate report from metrics.csv

Every command takes --config (json5 experiment file). The output directory
and device can be overridden with PRIVATE_SPEECH_OUTPUT_DIR and
PRIVATE_SPEECH_DEVICE, or with --output-dir / --device.
"""

import argparse
import glob
import os
import shutil
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from helpers.audio_io import read_wav, write_wav
from helpers.spectral import NormStats
from helpers.spectrogram_images import save_spectrogram_images
from settings.config import Config
from settings.experiment import MODES, ExperimentConfig, load_experiment_config
from steps.step1_prepare_dataset import (
    AudioClip, PreparedCorpus, load_prepared, load_prepared_stats, parse_clip_name, prepare_clip, run_prepare
)
from steps.step2_train_vocoder import GriffinLimVocoder, LearnedVocoder, load_pretrained, train_vocoder
from steps.step3_train_privacy import (
    load_privacy_bundle, read_run_info, run_dir_name, train, transform, write_run_info, write_run_snapshot
)
from steps.step4_evaluate import evaluate_run, load_fixed_classifiers, read_records, tradeoff_report, train_fixed_classifiers
from utils.error_handler import (
    CompatibilityError,
    DataError,
    EvaluationError,
    PrivateSpeechError,
    create_error_context,
    exit_code_for,
    log_error_with_context,
)
from utils.gpu_manager import clear_gpu_cache, resolve_device
from utils.logging_config import setup_logging
from utils.logging_utils import get_logger, log_performance_summary, log_system_info

logger = get_logger("cli")

VOCODER_FILE = Path("vocoder") / "melgan.pt"
RUNS_DIR = "runs"
REPORT_DIR = "report"


def vocoder_path(config: ExperimentConfig) -> Path:
    return config.output_path / VOCODER_FILE


def runs_path(config: ExperimentConfig) -> Path:
    return config.output_path / RUNS_DIR


def resolve_vocoder(config: ExperimentConfig, stats: NormStats, device=None):
    """Learned vocoder when one has been trained, Griffin-Lim otherwise."""
    path = vocoder_path(config)
    if path.is_file():
        bundle = load_pretrained(path, config.spectral, stats, map_location=device or "cpu")
        return LearnedVocoder(bundle)
    logger.warning(f"No trained vocoder at {path}; falling back to Griffin-Lim inversion")
    return GriffinLimVocoder(config.spectral)


def grid_cells(config: ExperimentConfig, args: argparse.Namespace) -> List[Tuple[float, int, str]]:
    """Grid cells selected by --epsilon/--seed/--mode (unset flags keep the config grid)."""
    epsilons = [args.epsilon] if args.epsilon is not None else list(config.epsilons)
    seeds = [args.seed] if args.seed is not None else list(config.seeds)
    modes = [args.mode] if args.mode is not None else list(config.modes)
    return [(eps, seed, mode) for eps in epsilons for seed in seeds for mode in modes]


def cmd_prepare(config: ExperimentConfig, args: argparse.Namespace) -> int:
    config.validate(check_paths=True)
    cache_dir, did_work = run_prepare(config, force=args.force)
    if did_work:
        print(f"Prepared corpus written to {cache_dir}")
    else:
        print(f"Prepared corpus in {cache_dir} is already up to date")
    return Config.EXIT_OK


def cmd_train_vocoder(config: ExperimentConfig, args: argparse.Namespace) -> int:
    corpus = load_prepared(config)
    clips = corpus.split.train
    specs = corpus.train_specs
    if config.vocoder.corpus == "all":
        clips = clips + corpus.split.test
        specs = np.concatenate([corpus.train_specs, corpus.test_specs])

    path = vocoder_path(config)
    if args.force and path.exists():
        path.unlink()
    bundle = train_vocoder(
        PreparedCorpus.waveforms(clips), specs, config.vocoder, config.spectral, corpus.stats,
        device=args.device_obj,
        checkpoint_path=path,
        resume_from=path if path.is_file() else None,
    )
    evaluations = bundle.metadata.get("evaluations", [])
    if evaluations:
        print(f"Vocoder saved to {path} (spectral distance {evaluations[0]['spectral_distance']:.4f} -> "
              f"{evaluations[-1]['spectral_distance']:.4f})")
    return Config.EXIT_OK


def cmd_train_classifiers(config: ExperimentConfig, args: argparse.Namespace) -> int:
    corpus = load_prepared(config)
    bundles = train_fixed_classifiers(corpus, config, device=args.device_obj)
    for (task, domain), bundle in sorted(bundles.items()):
        print(f"  {task:6s} {domain:12s} clean accuracy {bundle.clean_accuracy:6.2f}%")
    return Config.EXIT_OK


def cmd_train(config: ExperimentConfig, args: argparse.Namespace) -> int:
    corpus = load_prepared(config)
    _, genders = PreparedCorpus.labels(corpus.split.train)
    vocoder = resolve_vocoder(config, corpus.stats, args.device_obj)
    stats_fingerprint = corpus.stats.fingerprint(config.spectral)

    for epsilon, seed, mode in grid_cells(config, args):
        run_dir = runs_path(config) / run_dir_name(epsilon, seed, mode)
        if read_run_info(run_dir).get("completed") and not args.force:
            print(f"Skipping {run_dir.name}: already complete (use --force to retrain)")
            continue
        if args.force and run_dir.exists():
            shutil.rmtree(run_dir)

        cfg = config.train.for_cell(epsilon, seed, mode)
        write_run_snapshot(run_dir, config, cfg)
        write_run_info(run_dir, completed=False, vocoder_hash=vocoder.checkpoint_hash,
                       vocoder=vocoder.name, stats_fingerprint=stats_fingerprint)
        try:
            bundle, logs = train(
                corpus.train_specs, genders, cfg, config.spectral, config.unet, config.discriminator,
                run_dir=run_dir, device=args.device_obj, resume=True,
            )
        except PrivateSpeechError as e:
            context = create_error_context("train", run=run_dir.name, epsilon=epsilon, seed=seed, mode=mode,
                                           error_code=e.error_code)
            log_error_with_context(logger, e, context)
            raise
        write_run_info(run_dir, completed=True, epochs=bundle.epoch, steps=bundle.step)
        print(f"Finished {run_dir.name}: {bundle.step} steps, last dist_F {logs[-1].dist_F:.4f}" if logs
              else f"Finished {run_dir.name}")
        clear_gpu_cache()
    return Config.EXIT_OK


def _load_input_clip(path: Path, config: ExperimentConfig) -> AudioClip:
    samples, rate = read_wav(path)
    parsed = parse_clip_name(path.name)
    digit, speaker, repetition = parsed if parsed else (-1, path.stem, 0)
    clip = AudioClip(samples=samples, sample_rate=rate, digit=digit, gender=-1,
                     speaker_id=speaker, repetition=repetition, path=str(path))
    return prepare_clip(clip, config.spectral.sample_rate, config.spectral.num_samples)


def cmd_transform(config: ExperimentConfig, args: argparse.Namespace) -> int:
    stats = load_prepared_stats(config)
    checkpoint = Path(args.checkpoint)
    bundle, _ = load_privacy_bundle(checkpoint, map_location=args.device_obj)

    if bundle.config.get("spectral") != config.spectral.to_dict():
        raise CompatibilityError(
            f"Checkpoint {checkpoint.name} was trained with other spectral settings",
            error_code="SPECTRAL_MISMATCH",
            details={"checkpoint": bundle.config.get("spectral"), "expected": config.spectral.to_dict()}
        )
    trained_with = read_run_info(checkpoint.parent.parent).get("stats_fingerprint")
    expected = stats.fingerprint(config.spectral)
    if trained_with is not None and trained_with != expected:
        raise CompatibilityError(
            f"Checkpoint {checkpoint.name} was trained with normalization {trained_with}, "
            f"the prepared corpus has {expected}",
            error_code="STATS_MISMATCH",
            details={"checkpoint": trained_with, "expected": expected}
        )

    vocoder = resolve_vocoder(config, stats, args.device_obj)
    s_syn = args.s_syn if args.s_syn == "random" else int(args.s_syn)
    out_dir = Path(args.out_dir or config.output_path / "transformed")
    out_dir.mkdir(parents=True, exist_ok=True)

    for name in args.inputs:
        path = Path(name)
        if not path.is_file():
            raise DataError(f"Input file not found: {path}", error_code="INPUT_MISSING", details={"path": str(path)})
        clip = _load_input_clip(path, config)
        result = transform(clip, bundle, stats, config.spectral, s_syn=s_syn, vocoder=vocoder,
                           seed=args.rng_seed, device=args.device_obj)
        suffix = f"s{result.s_syn}" if result.s_syn is not None else "baseline"
        output = write_wav(out_dir / f"{path.stem}_{suffix}.wav", result.waveform, config.spectral.sample_rate)
        print(f"  {path.name} -> {output}")
        if args.images:
            panels = {"original": result.m.values, "filtered": result.m_prime.values}
            if result.m_dprime is not None:
                panels["generated"] = result.m_dprime.values
            save_spectrogram_images(out_dir, f"{path.stem}_{suffix}", panels)
    return Config.EXIT_OK


def cmd_evaluate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    classifiers = load_fixed_classifiers(config, device=args.device_obj)
    pattern = args.runs or str(runs_path(config) / "*")
    run_dirs = sorted(Path(p) for p in glob.glob(pattern) if Path(p).is_dir())
    if not run_dirs:
        raise DataError(f"No run directories match {pattern}", error_code="NO_RUNS", details={"pattern": pattern})

    corpus = load_prepared(config)
    vocoder = resolve_vocoder(config, corpus.stats, args.device_obj)
    records = []
    skipped = []
    for run_dir in run_dirs:
        try:
            records += evaluate_run(run_dir, classifiers, corpus, vocoder, device=args.device_obj)
        except PrivateSpeechError as e:
            if isinstance(e, EvaluationError) and e.error_code == "RUN_INCOMPLETE":
                logger.warning(f"Skipping {run_dir.name}: {e.message}")
                skipped.append(run_dir.name)
                continue
            log_error_with_context(logger, e, create_error_context("evaluate", run=run_dir.name, error_code=e.error_code))
            raise

    if not records:
        raise EvaluationError(
            f"None of the {len(run_dirs)} runs matching {pattern} has finished training",
            error_code="NO_COMPLETED_RUNS",
            details={"pattern": pattern, "skipped": skipped}
        )
    if skipped:
        print(f"  skipped {len(skipped)} unfinished run(s): {', '.join(skipped)}")

    written = tradeoff_report(records, config.output_path / REPORT_DIR)
    for name, path in written.items():
        print(f"  {name:12s} {path}")
    return Config.EXIT_OK


def cmd_report(config: ExperimentConfig, args: argparse.Namespace) -> int:
    source = Path(args.records or config.output_path / REPORT_DIR / "metrics.csv")
    if not source.is_file():
        raise DataError(
            f"No metrics file at {source}; run the 'evaluate' command first",
            error_code="METRICS_MISSING",
            details={"path": str(source)}
        )
    written = tradeoff_report(read_records(source), config.output_path / REPORT_DIR)
    for name, path in written.items():
        print(f"  {name:12s} {path}")
    return Config.EXIT_OK


COMMANDS = {
    "prepare": cmd_prepare,
    "train-vocoder": cmd_train_vocoder,
    "train-classifiers": cmd_train_classifiers,
    "train": cmd_train,
    "transform": cmd_transform,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Experiment file (json5)")
    common.add_argument("--output-dir", default=None,
                        help="Output directory (default: PRIVATE_SPEECH_OUTPUT_DIR or paths.output_dir)")
    common.add_argument("--device", default=None, help="auto, cpu, cuda or cuda:N (default: PRIVATE_SPEECH_DEVICE)")
    common.add_argument("--log-level", default=Config.LOG_LEVEL, help="Logging level (default: %(default)s)")

    parser = argparse.ArgumentParser(
        prog="private-speech",
        description="Filter/generator privacy transformation of spoken-digit recordings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="Build the prepared corpus cache")
    p.add_argument("--force", action="store_true", help="Rebuild even if the cache is current")

    p = sub.add_parser("train-vocoder", parents=[common], help="Train the MelGAN vocoder")
    p.add_argument("--force", action="store_true", help="Discard an existing vocoder checkpoint")

    sub.add_parser("train-classifiers", parents=[common], help="Train the fixed evaluation classifiers")

    p = sub.add_parser("train", parents=[common], help="Privacy training over the grid (or one cell)")
    p.add_argument("--mode", choices=MODES, default=None, help="Only this mode")
    p.add_argument("--epsilon", type=_positive_float, default=None, help="Only this distortion budget")
    p.add_argument("--seed", type=int, default=None, help="Only this seed")
    p.add_argument("--force", action="store_true", help="Retrain cells that are already complete")

    p = sub.add_parser("transform", parents=[common], help="Transform WAV files")
    p.add_argument("inputs", nargs="+", help="Input WAV files (16-bit PCM mono)")
    p.add_argument("--checkpoint", required=True, help="Privacy checkpoint (.pt)")
    p.add_argument("--s-syn", choices=("0", "1", "random"), default="random",
                   help="Synthetic attribute for the generator (default: %(default)s)")
    p.add_argument("--rng-seed", type=int, default=0, help="Seed of the noise and of --s-syn random")
    p.add_argument("--images", action="store_true", help="Also write spectrogram images")
    p.add_argument("--out-dir", default=None, help="Output directory (default: <output>/transformed)")

    p = sub.add_parser("evaluate", parents=[common], help="Evaluate finished runs")
    p.add_argument("--runs", default=None, help="Glob of run directories (default: <output>/runs/*)")

    p = sub.add_parser("report", parents=[common], help="Rebuild the aggregate report")
    p.add_argument("--records", default=None, help="metrics.csv to aggregate (default: <output>/report/metrics.csv)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        output_override = args.output_dir or os.getenv("PRIVATE_SPEECH_OUTPUT_DIR")
        config = load_experiment_config(args.config, output_dir_override=output_override)
        args.device_obj = resolve_device(args.device)
        if args.log_level.upper() == "DEBUG":
            log_system_info()
        code = COMMANDS[args.command](config, args)
        log_performance_summary()
        return code
    except PrivateSpeechError as e:
        log_error_with_context(logger, e, create_error_context(args.command, config=args.config, error_code=e.error_code))
        print(f"ERROR ({e.error_code}): {e.message}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
