"""
STEP 4: EVALUATE

Fixed digit/gender classifiers in the spectrogram and audio domains, privacy
and utility accuracies of transformed test sets, the Frechet distance over
audio-classifier embeddings, and the privacy-vs-utility report.
"""

import sys
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from helpers.checkpoints import load_checkpoint, parameter_fingerprint, save_checkpoint
from helpers.networks import DOMAINS, build_classifier, classifier_forward
from settings.config import Config
from settings.experiment import ClassifierConfig, ExperimentConfig
from steps.step1_prepare_dataset import PreparedCorpus
from steps.step3_train_privacy import (
    draw_synthetic_attributes,
    latest_checkpoint,
    load_privacy_bundle,
    read_run_info,
    read_run_snapshot,
    transform_values,
)
from utils.error_handler import (
    CompatibilityError, ConfigurationError, DegenerateStatisticsError, DimensionError,
    EvaluationError, EvaluationValidityError, NumericError
)
from utils.file_operations import atomic_write_json, ensure_directory, read_csv, write_csv
from utils.logging_utils import get_logger, get_structured_logger, log_step

logger = get_logger("evaluation")
eval_log = get_structured_logger("evaluation.records")

TASKS = ("digit", "gender")
CLASSIFIER_DIR = "classifiers"
RECORD_COLUMNS = ("epsilon", "seed", "mode", "domain", "privacy_acc", "utility_acc", "fid", "mean_distortion")
AGGREGATE_COLUMNS = (
    "epsilon", "mode", "domain", "runs",
    "privacy_acc_mean", "privacy_acc_std", "utility_acc_mean", "utility_acc_std",
    "fid_mean", "fid_std", "mean_distortion_mean", "mean_distortion_std",
)


@dataclass
class MetricsRecord:
    epsilon: float
    seed: int
    mode: str
    domain: str
    privacy_acc: float
    utility_acc: float
    fid: Optional[float]
    mean_distortion: float

    def __post_init__(self):
        for name in ("privacy_acc", "utility_acc"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise EvaluationError(
                    f"{name} must be a percentage, got {value}",
                    error_code="BAD_ACCURACY",
                    details={name: value}
                )
        if self.fid is not None and self.fid < 0:
            raise EvaluationError(f"FID cannot be negative, got {self.fid}", error_code="NEGATIVE_FID")

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ClassifierBundle:
    """A frozen evaluation classifier and its clean-test record."""

    model: nn.Module
    task: str
    domain: str
    clean_accuracy: float
    majority_accuracy: float

    @property
    def parameter_hash(self) -> str:
        return parameter_fingerprint(self.model)


def _model_of(classifier: Union[ClassifierBundle, nn.Module]) -> nn.Module:
    return classifier.model if isinstance(classifier, ClassifierBundle) else classifier


def _device_of(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


def freeze(model: nn.Module) -> nn.Module:
    for p in model.parameters():
        p.requires_grad_(False)
    return model.eval()


def majority_rate(labels: np.ndarray) -> float:
    """Accuracy (percent) of always predicting the most frequent label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return float(100.0 * np.bincount(labels).max() / labels.size)


def predict_labels(classifier: Union[ClassifierBundle, nn.Module], inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    model = _model_of(classifier)
    device = _device_of(model)
    was_training = model.training
    model.eval()
    predictions = []
    with torch.no_grad():
        for start in range(0, len(inputs), batch_size):
            batch = torch.as_tensor(np.asarray(inputs[start:start + batch_size], dtype=np.float32), device=device)
            probabilities = classifier_forward(model, batch, model.task)
            predictions.append(probabilities.argmax(dim=-1).cpu().numpy())
    model.train(was_training)
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def accuracy_eval(classifier: Union[ClassifierBundle, nn.Module], inputs: np.ndarray, labels: np.ndarray) -> float:
    """
    Top-1 accuracy in percent.

    Raises:
        EvaluationError: Empty evaluation set
        DimensionError: Inputs and labels differ in length
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(inputs) == 0:
        raise EvaluationError("Cannot evaluate on an empty set", error_code="EMPTY_EVALUATION_SET")
    if len(inputs) != len(labels):
        raise DimensionError(
            f"{len(inputs)} inputs but {len(labels)} labels",
            error_code="LABEL_COUNT_MISMATCH",
            details={"inputs": len(inputs), "labels": len(labels)}
        )
    return float(100.0 * np.mean(predict_labels(classifier, inputs) == labels))


def fit_classifier(
    model: nn.Module,
    inputs: np.ndarray,
    labels: np.ndarray,
    cfg: ClassifierConfig,
    device: Optional[torch.device] = None
) -> nn.Module:
    """Plain Adam/cross-entropy training with shuffled mini-batches drawn from cfg.seed."""
    device = device or torch.device("cpu")
    model.to(device).train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    inputs_t = torch.as_tensor(np.asarray(inputs, dtype=np.float32))
    labels_t = torch.as_tensor(np.asarray(labels, dtype=np.int64))
    rng = torch.Generator().manual_seed(cfg.seed)
    # BatchNorm needs at least two samples per batch
    min_batch = 2 if len(inputs_t) > 1 else 1

    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(len(inputs_t), generator=rng)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            if len(index) < min_batch:
                continue
            optimizer.zero_grad()
            loss = F.cross_entropy(model(inputs_t[index].to(device)), labels_t[index].to(device))
            loss.backward()
            optimizer.step()
            total += float(loss.item()) * len(index)
        logger.debug(f"{model.task}/{model.domain} classifier epoch {epoch}: loss {total / len(inputs_t):.4f}")
    return model


def classifier_path(output_dir: Union[str, Path], task: str, domain: str) -> Path:
    return Path(output_dir) / CLASSIFIER_DIR / f"{task}_{domain}.pt"


def classifier_config(task: str, domain: str, config: ExperimentConfig) -> Dict[str, Any]:
    architecture = config.discriminator.to_dict() if domain == "spectrogram" else config.audionet.to_dict()
    return {"task": task, "domain": domain, "architecture": architecture, "spectral": config.spectral.to_dict()}


@log_step("train_classifiers", "Training fixed evaluation classifiers")
def train_fixed_classifiers(
    corpus: PreparedCorpus,
    config: ExperimentConfig,
    device: Optional[torch.device] = None,
    save: bool = True
) -> Dict[Tuple[str, str], ClassifierBundle]:
    """
    Train the four fixed classifiers (digit/gender x spectrogram/audio) on
    clean training data and record their clean-test accuracy.

    Returns:
        {(task, domain): ClassifierBundle}, every model frozen

    Raises:
        EvaluationValidityError: A classifier does not beat the majority class
            on the clean test set
    """
    cfg = config.classifier
    train_digits, train_genders = PreparedCorpus.labels(corpus.split.train)
    test_digits, test_genders = PreparedCorpus.labels(corpus.split.test)
    inputs = {
        "spectrogram": (corpus.train_specs, corpus.test_specs),
        "audio": (PreparedCorpus.waveforms(corpus.split.train), PreparedCorpus.waveforms(corpus.split.test)),
    }
    labels = {"digit": (train_digits, test_digits), "gender": (train_genders, test_genders)}
    stats_fingerprint = corpus.stats.fingerprint(config.spectral)

    bundles = {}
    summary = {}
    for domain in DOMAINS:
        for task in TASKS:
            torch.manual_seed(cfg.seed)
            model = build_classifier(task, domain, config.discriminator, config.audionet)
            fit_classifier(model, inputs[domain][0], labels[task][0], cfg, device)
            freeze(model)

            clean = accuracy_eval(model, inputs[domain][1], labels[task][1])
            majority = majority_rate(labels[task][1])
            if clean <= majority:
                raise EvaluationValidityError(
                    f"{task}/{domain} classifier reached {clean:.1f}% on clean test data, "
                    f"not above the majority-class rate {majority:.1f}%",
                    error_code="BELOW_MAJORITY",
                    details={"task": task, "domain": domain, "clean_accuracy": clean, "majority_accuracy": majority}
                )
            if clean < cfg.min_clean_accuracy:
                logger.warning(
                    f"{task}/{domain} clean accuracy {clean:.1f}% is below the {cfg.min_clean_accuracy:.0f}% floor; "
                    "privacy numbers from this classifier are less meaningful"
                )

            bundle = ClassifierBundle(model=model, task=task, domain=domain, clean_accuracy=clean, majority_accuracy=majority)
            bundles[(task, domain)] = bundle
            summary[f"{task}_{domain}"] = {"clean_accuracy": clean, "majority_accuracy": majority}
            eval_log.info("Fixed classifier trained", task=task, domain=domain, clean_acc=clean, majority=majority)

            if save:
                save_checkpoint(
                    classifier_path(config.output_path, task, domain),
                    "classifier",
                    classifier_config(task, domain, config),
                    model.state_dict(),
                    extra={
                        "clean_accuracy": clean,
                        "majority_accuracy": majority,
                        "stats_fingerprint": stats_fingerprint,
                        "parameter_hash": bundle.parameter_hash,
                    },
                )

    if save:
        atomic_write_json(config.output_path / CLASSIFIER_DIR / "summary.json", summary)
    return bundles


def load_fixed_classifiers(
    config: ExperimentConfig,
    device: Optional[torch.device] = None
) -> Dict[Tuple[str, str], ClassifierBundle]:
    """
    Raises:
        EvaluationError: Classifiers have not been trained yet
        CompatibilityError: Classifier architecture differs from the config
    """
    bundles = {}
    for domain in DOMAINS:
        for task in TASKS:
            path = classifier_path(config.output_path, task, domain)
            if not path.is_file():
                raise EvaluationError(
                    f"Fixed classifier {path.name} not found; run the 'train-classifiers' command first",
                    error_code="FIXED_CLASSIFIERS_MISSING",
                    details={"file_path": str(path)}
                )
            payload = load_checkpoint(path, "classifier", expected_config=classifier_config(task, domain, config))
            model = build_classifier(task, domain, config.discriminator, config.audionet)
            model.load_state_dict(payload["tensors"])
            freeze(model.to(device or torch.device("cpu")))
            bundles[(task, domain)] = ClassifierBundle(
                model=model,
                task=task,
                domain=domain,
                clean_accuracy=float(payload["extra"]["clean_accuracy"]),
                majority_accuracy=float(payload["extra"]["majority_accuracy"]),
            )
    return bundles


@dataclass(frozen=True)
class EmbeddingStats:
    """Gaussian fit (mean, sample covariance) of an embedding set."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise DegenerateStatisticsError(
                f"Need at least 2 embeddings for a covariance, got {self.count}",
                error_code="TOO_FEW_EMBEDDINGS",
                details={"count": self.count}
            )
        dim = self.mean.shape[0]
        if self.covariance.shape != (dim, dim):
            raise DimensionError(
                f"Covariance shape {self.covariance.shape} does not match mean dimension {dim}",
                error_code="BAD_COVARIANCE_SHAPE",
                details={"mean": dim, "covariance": list(self.covariance.shape)}
            )
        if not np.allclose(self.covariance, self.covariance.T, rtol=0.0, atol=1e-8):
            raise NumericError("Covariance is not symmetric", error_code="ASYMMETRIC_COVARIANCE")

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def from_embeddings(cls, embeddings: np.ndarray, shrinkage: float = Config.FID_SHRINKAGE) -> "EmbeddingStats":
        """
        Fit mean and covariance. With fewer samples than dimensions the
        covariance is rank deficient, so shrinkage * I is added.
        """
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2:
            raise DimensionError(
                f"Embeddings must be (count, dim), got shape {embeddings.shape}",
                error_code="BAD_EMBEDDING_SHAPE"
            )
        count, dim = embeddings.shape
        if count < 2:
            raise DegenerateStatisticsError(
                f"Need at least 2 embeddings for a covariance, got {count}",
                error_code="TOO_FEW_EMBEDDINGS",
                details={"count": count}
            )
        covariance = np.cov(embeddings, rowvar=False).reshape(dim, dim)
        if count < dim:
            logger.warning(f"Only {count} embeddings for dimension {dim}; adding {shrinkage:g} * I to the covariance")
            covariance = covariance + shrinkage * np.eye(dim)
        covariance = (covariance + covariance.T) / 2.0
        return cls(mean=embeddings.mean(axis=0), covariance=covariance, count=count)


def _clamped_eigenvalues(eigenvalues: np.ndarray, tolerance: float, what: str) -> np.ndarray:
    smallest = float(eigenvalues.min()) if eigenvalues.size else 0.0
    if smallest < -tolerance:
        raise NumericError(
            f"{what} is not positive semi-definite (min eigenvalue {smallest:.3e})",
            error_code="NOT_PSD",
            details={"min_eigenvalue": smallest, "tolerance": tolerance}
        )
    return np.clip(eigenvalues, 0.0, None)


def psd_sqrt(matrix: np.ndarray, tolerance: float = Config.FID_EIGEN_TOLERANCE) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition."""
    eigenvalues, eigenvectors = np.linalg.eigh((matrix + matrix.T) / 2.0)
    root = np.sqrt(_clamped_eigenvalues(eigenvalues, tolerance, "Covariance"))
    return (eigenvectors * root) @ eigenvectors.T


def frechet_distance(a: EmbeddingStats, b: EmbeddingStats, tolerance: float = Config.FID_EIGEN_TOLERANCE) -> float:
    """
    ||mu_a - mu_b||^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^1/2 S_b S_a^1/2)^1/2)

    Raises:
        DimensionError: Embedding dimensions differ
        NumericError: A covariance (or the product) has an eigenvalue below -tolerance
    """
    if a.dim != b.dim:
        raise DimensionError(
            f"Embedding dimensions differ: {a.dim} vs {b.dim}",
            error_code="EMBEDDING_DIM_MISMATCH",
            details={"a": a.dim, "b": b.dim}
        )
    sqrt_a = psd_sqrt(a.covariance, tolerance)
    product = sqrt_a @ b.covariance @ sqrt_a
    product = (product + product.T) / 2.0
    eigenvalues = _clamped_eigenvalues(np.linalg.eigvalsh(product), tolerance, "Covariance product")

    diff = a.mean - b.mean
    distance = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * np.sqrt(eigenvalues).sum())
    return max(distance, 0.0)


def embed_waveforms(classifier: Union[ClassifierBundle, nn.Module], waveforms: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Flattened last-convolution features of the audio classifier."""
    model = _model_of(classifier)
    if getattr(model, "domain", None) != "audio":
        raise ConfigurationError(
            "FID embeddings need the audio-domain classifier",
            error_code="DOMAIN_MISMATCH",
            details={"domain": getattr(model, "domain", None)}
        )
    device = _device_of(model)
    was_training = model.training
    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(waveforms), batch_size):
            batch = torch.as_tensor(np.asarray(waveforms[start:start + batch_size], dtype=np.float32), device=device)
            chunks.append(model.embed(batch).double().cpu().numpy())
    model.train(was_training)
    return np.concatenate(chunks)


def fid_audio(
    real_waveforms: np.ndarray,
    transformed_waveforms: np.ndarray,
    audio_classifier: Union[ClassifierBundle, nn.Module],
    shrinkage: float = Config.FID_SHRINKAGE
) -> float:
    """
    Frechet distance between audio-classifier embeddings of two clip sets.

    Raises:
        EvaluationError: Either set is empty
    """
    if len(real_waveforms) == 0 or len(transformed_waveforms) == 0:
        raise EvaluationError(
            "FID needs two non-empty clip sets",
            error_code="EMPTY_EVALUATION_SET",
            details={"real": len(real_waveforms), "transformed": len(transformed_waveforms)}
        )
    real = EmbeddingStats.from_embeddings(embed_waveforms(audio_classifier, real_waveforms), shrinkage)
    fake = EmbeddingStats.from_embeddings(embed_waveforms(audio_classifier, transformed_waveforms), shrinkage)
    return frechet_distance(real, fake)


def domain_records(
    classifiers: Mapping[Tuple[str, str], ClassifierBundle],
    spectrograms: np.ndarray,
    waveforms: np.ndarray,
    reference_waveforms: np.ndarray,
    digits: np.ndarray,
    genders: np.ndarray,
    epsilon: float,
    seed: int,
    mode: str,
    mean_distortion: float,
    fid_shrinkage: float = Config.FID_SHRINKAGE
) -> List[MetricsRecord]:
    """One record per domain for an already transformed test set."""
    records = [
        MetricsRecord(
            epsilon=epsilon, seed=seed, mode=mode, domain="spectrogram",
            privacy_acc=accuracy_eval(classifiers[("gender", "spectrogram")], spectrograms, genders),
            utility_acc=accuracy_eval(classifiers[("digit", "spectrogram")], spectrograms, digits),
            fid=None,
            mean_distortion=mean_distortion,
        ),
        MetricsRecord(
            epsilon=epsilon, seed=seed, mode=mode, domain="audio",
            privacy_acc=accuracy_eval(classifiers[("gender", "audio")], waveforms, genders),
            utility_acc=accuracy_eval(classifiers[("digit", "audio")], waveforms, digits),
            fid=fid_audio(reference_waveforms, waveforms, classifiers[("digit", "audio")], fid_shrinkage),
            mean_distortion=mean_distortion,
        ),
    ]
    for record in records:
        eval_log.info("Evaluated", **record.to_row())
    return records


@log_step("evaluate_run", "Evaluating one privacy run")
def evaluate_run(
    run_dir: Union[str, Path],
    classifiers: Mapping[Tuple[str, str], ClassifierBundle],
    corpus: PreparedCorpus,
    vocoder,
    device: Optional[torch.device] = None
) -> List[MetricsRecord]:
    """
    Transform the clean test set with a finished run and score it in both
    domains. The run's stored config snapshot decides epsilon, seed and mode.

    Args:
        run_dir: Run directory (config_snapshot.json + checkpoints/)
        classifiers: Fixed classifiers from train_fixed_classifiers/load_fixed_classifiers
        corpus: Prepared corpus (test split and normalization stats)
        vocoder: GriffinLimVocoder or LearnedVocoder

    Raises:
        EvaluationError: Run has no finished checkpoint
        CompatibilityError: Run was trained with other normalization statistics
    """
    run_dir = Path(run_dir)
    experiment, cfg = read_run_snapshot(run_dir)
    checkpoint = latest_checkpoint(run_dir)
    if checkpoint is None:
        raise EvaluationError(
            f"Run {run_dir.name} has no checkpoint",
            error_code="RUN_INCOMPLETE",
            details={"run_dir": str(run_dir)}
        )
    bundle, extra = load_privacy_bundle(checkpoint, map_location=device or "cpu")
    if not extra.get("completed", False):
        raise EvaluationError(
            f"Run {run_dir.name} stopped at epoch {bundle.epoch} of {cfg.epochs}",
            error_code="RUN_INCOMPLETE",
            details={"run_dir": str(run_dir), "epoch": bundle.epoch}
        )

    expected = corpus.stats.fingerprint(experiment.spectral)
    trained_with = read_run_info(run_dir).get("stats_fingerprint", expected)
    if trained_with != expected:
        raise CompatibilityError(
            f"Run {run_dir.name} was trained with normalization {trained_with}, the prepared corpus has {expected}",
            error_code="STATS_MISMATCH",
            details={"checkpoint": trained_with, "expected": expected}
        )

    digits, genders = PreparedCorpus.labels(corpus.split.test)
    s_syn = draw_synthetic_attributes(len(genders), cfg.seed)
    m_prime, m_dprime = transform_values(corpus.test_specs, bundle, s_syn=s_syn, seed=cfg.seed, device=device)
    final = m_dprime if m_dprime is not None else m_prime
    mean_distortion = float(np.mean(np.abs(final - corpus.test_specs)))
    waveforms = vocoder.invert_batch(final, corpus.stats)

    return domain_records(
        classifiers, final, waveforms, PreparedCorpus.waveforms(corpus.split.test),
        digits, genders, cfg.epsilon, cfg.seed, cfg.mode, mean_distortion,
        fid_shrinkage=experiment.classifier.fid_shrinkage,
    )


def aggregate_records(records: Iterable[MetricsRecord]) -> List[Dict[str, Any]]:
    """Mean and population std per (epsilon, mode, domain)."""
    groups: Dict[Tuple[float, str, str], List[MetricsRecord]] = defaultdict(list)
    for record in records:
        groups[(record.epsilon, record.mode, record.domain)].append(record)

    rows = []
    for (epsilon, mode, domain), group in sorted(groups.items()):
        row = {"epsilon": epsilon, "mode": mode, "domain": domain, "runs": len(group)}
        for name in ("privacy_acc", "utility_acc", "fid", "mean_distortion"):
            values = np.array([getattr(r, name) for r in group if getattr(r, name) is not None], dtype=np.float64)
            row[f"{name}_mean"] = float(values.mean()) if values.size else None
            row[f"{name}_std"] = float(values.std()) if values.size else None
        rows.append(row)
    return rows


def plot_tradeoff(rows: Sequence[Dict[str, Any]], domain: str, output_path: Union[str, Path]) -> Path:
    """
    Privacy (x, gender accuracy) vs utility (y, digit accuracy) scatter with
    one point per (epsilon, mode).

    Raises:
        ConfigurationError: Rows from several domains or an unknown domain
    """
    if domain not in DOMAINS:
        raise ConfigurationError(
            f"Unknown domain {domain!r}",
            error_code="INVALID_CHOICE",
            details={"domain": domain, "choices": list(DOMAINS)}
        )
    found = sorted({row["domain"] for row in rows})
    if found != [domain]:
        raise ConfigurationError(
            f"A trade-off plot covers one domain, got rows for {found}",
            error_code="MIXED_DOMAINS",
            details={"domain": domain, "found": found}
        )

    fig, ax = plt.subplots(figsize=(6, 5))
    for mode, marker in (("baseline", "s"), ("full", "o")):
        points = [row for row in rows if row["mode"] == mode]
        if not points:
            continue
        ax.errorbar(
            [p["privacy_acc_mean"] for p in points],
            [p["utility_acc_mean"] for p in points],
            xerr=[p["privacy_acc_std"] for p in points],
            yerr=[p["utility_acc_std"] for p in points],
            fmt=marker, capsize=3, label=mode,
        )
        for p in points:
            ax.annotate(f"{p['epsilon']:g}", (p["privacy_acc_mean"], p["utility_acc_mean"]),
                        textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("Privacy: gender accuracy (%)")
    ax.set_ylabel("Utility: digit accuracy (%)")
    ax.set_title(f"Privacy vs utility ({domain})")
    ax.grid(True, alpha=0.3)
    ax.legend()
    output_path = Path(output_path)
    ensure_directory(output_path.parent)
    fig.savefig(output_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return output_path


@log_step("tradeoff_report", "Writing privacy/utility report")
def tradeoff_report(records: Sequence[MetricsRecord], output_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write metrics.csv (one row per record), metrics_aggregate.csv and one
    trade-off plot per domain.

    Returns:
        {"records": ..., "aggregate": ..., "<domain>": plot path}
    """
    output_dir = ensure_directory(output_dir)
    for record in records:
        if record.domain not in DOMAINS:
            raise ConfigurationError(
                f"Unknown domain {record.domain!r} in metrics record",
                error_code="INVALID_CHOICE",
                details={"domain": record.domain, "choices": list(DOMAINS)}
            )
    if not records:
        raise EvaluationError("No metrics records to report", error_code="EMPTY_REPORT")

    written = {
        "records": write_csv(output_dir / "metrics.csv", RECORD_COLUMNS, [r.to_row() for r in records]),
    }
    rows = aggregate_records(records)
    written["aggregate"] = write_csv(output_dir / "metrics_aggregate.csv", AGGREGATE_COLUMNS, rows)
    for domain in DOMAINS:
        domain_rows = [row for row in rows if row["domain"] == domain]
        if domain_rows:
            written[domain] = plot_tradeoff(domain_rows, domain, output_dir / f"tradeoff_{domain}.png")
    logger.info(f"Report written to {output_dir}")
    return written


def read_records(file_path: Union[str, Path]) -> List[MetricsRecord]:
    """Records back from a metrics.csv written by tradeoff_report."""
    records = []
    for row in read_csv(file_path):
        records.append(MetricsRecord(
            epsilon=float(row["epsilon"]),
            seed=int(row["seed"]),
            mode=row["mode"],
            domain=row["domain"],
            privacy_acc=float(row["privacy_acc"]),
            utility_acc=float(row["utility_acc"]),
            fid=float(row["fid"]) if row["fid"] not in ("", None) else None,
            mean_distortion=float(row["mean_distortion"]),
        ))
    return records
