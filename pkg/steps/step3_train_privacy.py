"""
STEP 3: TRAIN PRIVACY MODELS

Adversarial training of the filter F, the generator G and their
discriminators D_F (female/male) and D_G (female/male/fake) under a
quadratic distortion penalty, plus the filter-only baseline mode and the
transform path used by the CLI and the evaluation.

Per batch: draw z1, z2 ~ N(0, 1) and s' ~ U{0, 1}; m' = F(m, z1);
m'' = G(m', s', z2); update F and G; then update D_F and D_G on the same
m' and m''.
"""

import math
import re
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from helpers.checkpoints import load_checkpoint, save_checkpoint
from helpers.networks import FAKE_CLASS, PrivacyModelBundle, filter_forward, generator_forward
from helpers.spectral import MelSpectrogram, NormStats, mel_spectrogram
from settings.experiment import DiscriminatorConfig, ExperimentConfig, SpectralConfig, TrainConfig, UNetConfig
from utils.error_handler import DataError, DimensionError, DomainError, PreparationError, TrainingFaultError, error_handler
from utils.file_operations import CsvStream, atomic_write_json, ensure_directory, read_json
from utils.gpu_manager import capture_rng_state, restore_rng_state, seed_everything
from utils.logging_utils import get_logger, get_structured_logger, log_step

logger = get_logger("privacy_training")
train_log = get_structured_logger("privacy_training.steps")

METRICS_COLUMNS = ("step", "loss_F", "loss_G", "loss_DF", "loss_DG", "dist_F", "dist_G")
METRICS_FILE = "metrics.csv"
CHECKPOINT_DIR = "checkpoints"
CHECKPOINT_PATTERN = re.compile(r"^epoch(?P<epoch>\d+)_.*\.pt$")
CONFIG_SNAPSHOT_FILE = "config_snapshot.json"
RUN_INFO_FILE = "run_info.json"


@dataclass
class StepLog:
    step: int
    epoch: int
    loss_F: float
    loss_DF: float
    dist_F: float
    loss_G: Optional[float] = None
    loss_DG: Optional[float] = None
    dist_G: Optional[float] = None

    def to_row(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in METRICS_COLUMNS}

    def losses(self) -> Dict[str, float]:
        return {k: v for k, v in asdict(self).items() if k not in ("step", "epoch") and v is not None}


class LossTerms(NamedTuple):
    loss: torch.Tensor
    output: torch.Tensor
    distortion: torch.Tensor


def mean_distortion(transformed: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over every spectrogram entry of the batch."""
    return (transformed - original).abs().mean()


def distortion_penalty(mean_d: Union[float, torch.Tensor], epsilon: float, lam: float) -> Union[float, torch.Tensor]:
    """
    lam * max(mean_d - epsilon, 0)**2

    Raises:
        DomainError: If mean_d is negative
    """
    value = float(mean_d.detach()) if isinstance(mean_d, torch.Tensor) else float(mean_d)
    if value < 0:
        raise DomainError(
            f"Mean distortion cannot be negative, got {value}",
            error_code="NEGATIVE_DISTORTION",
            details={"mean_d": value}
        )
    if isinstance(mean_d, torch.Tensor):
        return lam * torch.clamp(mean_d - epsilon, min=0.0) ** 2
    return lam * max(value - epsilon, 0.0) ** 2


@contextmanager
def frozen(module: nn.Module):
    """Temporarily stop gradients from accumulating in a module's parameters."""
    flags = [p.requires_grad for p in module.parameters()]
    for p in module.parameters():
        p.requires_grad_(False)
    try:
        yield module
    finally:
        for p, flag in zip(module.parameters(), flags):
            p.requires_grad_(flag)


def filter_loss(
    filter_net: nn.Module,
    disc_filter: nn.Module,
    m: torch.Tensor,
    z1: torch.Tensor,
    s: torch.Tensor,
    cfg: TrainConfig
) -> LossTerms:
    """L_F = -CE(D_F(F(m, z1)), s) + penalty(mean |m' - m|). D_F receives no gradient."""
    m_prime = filter_forward(filter_net, m, z1)
    distortion = mean_distortion(m_prime, m)
    with frozen(disc_filter):
        adversarial = -F.cross_entropy(disc_filter(m_prime), s)
    return LossTerms(adversarial + distortion_penalty(distortion, cfg.epsilon, cfg.lambda_penalty), m_prime, distortion)


def generator_target(s_syn: torch.Tensor, s: Optional[torch.Tensor], cfg: TrainConfig) -> torch.Tensor:
    """Cross-entropy target of the generator for the configured objective."""
    if cfg.generator_target == "synthetic":
        return s_syn
    if cfg.generator_target == "original":
        if s is None:
            raise DimensionError(
                "The 'original' generator target needs the true attribute labels",
                error_code="MISSING_LABELS"
            )
        return s
    return torch.full_like(s_syn, FAKE_CLASS)


def generator_loss(
    generator: nn.Module,
    disc_gen: nn.Module,
    m: torch.Tensor,
    m_prime: torch.Tensor,
    s_syn: torch.Tensor,
    z2: torch.Tensor,
    cfg: TrainConfig,
    s: Optional[torch.Tensor] = None
) -> LossTerms:
    """
    L_G = CE(D_G(G(m', s', z2)), target) + penalty(mean |m'' - m|).

    m' is treated as a constant and D_G receives no gradient. The target is s'
    by default (see TrainConfig.generator_target).
    """
    m_dprime = generator_forward(generator, m_prime.detach(), s_syn, z2)
    distortion = mean_distortion(m_dprime, m)
    with frozen(disc_gen):
        adversarial = F.cross_entropy(disc_gen(m_dprime), generator_target(s_syn, s, cfg))
    return LossTerms(adversarial + distortion_penalty(distortion, cfg.epsilon, cfg.lambda_penalty), m_dprime, distortion)


def disc_filter_loss(disc_filter: nn.Module, m_prime: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """CE(D_F(m'), s) with m' detached."""
    return F.cross_entropy(disc_filter(m_prime.detach()), s)


def disc_generator_loss(disc_gen: nn.Module, m: torch.Tensor, m_dprime: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """CE(D_G(m''), fake) + CE(D_G(m), s) with m'' detached."""
    fake = torch.full_like(s, FAKE_CLASS)
    return F.cross_entropy(disc_gen(m_dprime.detach()), fake) + F.cross_entropy(disc_gen(m), s)


def draw_synthetic_attributes(count: int, seed: int) -> np.ndarray:
    """s' for `count` clips, drawn uniformly from {0, 1} without looking at s."""
    return np.random.default_rng(seed).integers(0, 2, size=count)


class PrivacyTrainer:
    """
    Owns the optimizers and the sampling generator of one training run.
    All randomness (batches, z1, z2, s') comes from self.rng.
    """

    def __init__(self, bundle: PrivacyModelBundle, cfg: TrainConfig, device: Optional[torch.device] = None):
        self.bundle = bundle
        self.cfg = cfg
        self.device = device or torch.device("cpu")
        self.rng = torch.Generator().manual_seed(cfg.seed)
        self.optimizers: Dict[str, torch.optim.Optimizer] = {
            "filter": torch.optim.Adam(bundle.filter.parameters(), lr=cfg.lr_filter, betas=cfg.betas),
            "disc_filter": torch.optim.Adam(bundle.disc_filter.parameters(), lr=cfg.lr_disc_filter, betas=cfg.betas),
        }
        if bundle.generator is not None:
            self.optimizers["generator"] = torch.optim.Adam(bundle.generator.parameters(), lr=cfg.lr_generator, betas=cfg.betas)
            self.optimizers["disc_gen"] = torch.optim.Adam(bundle.disc_gen.parameters(), lr=cfg.lr_disc_gen, betas=cfg.betas)

    @property
    def full(self) -> bool:
        return self.bundle.generator is not None

    def sample_indices(self, num_items: int) -> torch.Tensor:
        return torch.randperm(num_items, generator=self.rng)[:self.cfg.batch_size]

    def draw(self, m: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(z1, z2, s') for a batch shaped like m."""
        z1 = torch.randn(m.shape, generator=self.rng, dtype=m.dtype)
        z2 = torch.randn(m.shape, generator=self.rng, dtype=m.dtype)
        s_syn = torch.randint(0, 2, (m.shape[0],), generator=self.rng)
        return z1.to(self.device), z2.to(self.device), s_syn.to(self.device)

    def update_filter_and_generator(
        self,
        m: torch.Tensor,
        s: torch.Tensor,
        z1: torch.Tensor,
        z2: torch.Tensor,
        s_syn: torch.Tensor
    ) -> Dict[str, Any]:
        bundle, cfg = self.bundle, self.cfg
        self.optimizers["filter"].zero_grad()
        filtered = filter_loss(bundle.filter, bundle.disc_filter, m, z1, s, cfg)
        filtered.loss.backward()
        self.optimizers["filter"].step()
        result = {"filter": filtered, "generator": None}

        if self.full:
            self.optimizers["generator"].zero_grad()
            generated = generator_loss(bundle.generator, bundle.disc_gen, m, filtered.output, s_syn, z2, cfg, s=s)
            generated.loss.backward()
            self.optimizers["generator"].step()
            result["generator"] = generated
        return result

    def update_discriminators(
        self,
        m: torch.Tensor,
        s: torch.Tensor,
        m_prime: torch.Tensor,
        m_dprime: Optional[torch.Tensor]
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        bundle = self.bundle
        self.optimizers["disc_filter"].zero_grad()
        loss_df = disc_filter_loss(bundle.disc_filter, m_prime, s)
        loss_df.backward()
        self.optimizers["disc_filter"].step()

        loss_dg = None
        if self.full and m_dprime is not None:
            self.optimizers["disc_gen"].zero_grad()
            loss_dg = disc_generator_loss(bundle.disc_gen, m, m_dprime, s)
            loss_dg.backward()
            self.optimizers["disc_gen"].step()
        return loss_df, loss_dg

    def train_step(self, m: torch.Tensor, s: torch.Tensor, epoch: int) -> StepLog:
        z1, z2, s_syn = self.draw(m)
        updated = self.update_filter_and_generator(m, s, z1, z2, s_syn)
        filtered, generated = updated["filter"], updated["generator"]
        loss_df, loss_dg = self.update_discriminators(
            m, s, filtered.output, generated.output if generated is not None else None
        )

        self.bundle.step += 1
        log = StepLog(
            step=self.bundle.step,
            epoch=epoch,
            loss_F=float(filtered.loss.item()),
            loss_DF=float(loss_df.item()),
            dist_F=float(filtered.distortion.item()),
        )
        if generated is not None:
            log.loss_G = float(generated.loss.item())
            log.loss_DG = float(loss_dg.item())
            log.dist_G = float(generated.distortion.item())

        bad = {k: v for k, v in log.losses().items() if not math.isfinite(v)}
        if bad:
            raise TrainingFaultError(
                f"Non-finite training loss at step {log.step}: {sorted(bad)}",
                error_code="NON_FINITE_LOSS",
                details={"step_log": asdict(log)}
            )
        return log

    def state(self) -> Dict[str, Any]:
        return {
            "optimizers": {name: opt.state_dict() for name, opt in self.optimizers.items()},
            "sampler_state": self.rng.get_state(),
        }

    def load_state(self, state: Dict[str, Any]) -> None:
        for name, opt in self.optimizers.items():
            opt.load_state_dict(state["optimizers"][name])
        self.rng.set_state(state["sampler_state"])


def run_dir_name(epsilon: float, seed: int, mode: str) -> str:
    return f"eps{epsilon:g}_seed{seed}_{mode}"


def checkpoint_name(epoch: int, cfg: TrainConfig) -> str:
    return f"epoch{epoch:04d}_eps{cfg.epsilon:g}_seed{cfg.seed}_{cfg.mode}.pt"


def latest_checkpoint(run_dir: Union[str, Path]) -> Optional[Path]:
    """Checkpoint with the highest epoch in run_dir/checkpoints, if any."""
    directory = Path(run_dir) / CHECKPOINT_DIR
    if not directory.is_dir():
        return None
    found = []
    for path in directory.glob("*.pt"):
        match = CHECKPOINT_PATTERN.match(path.name)
        if match:
            found.append((int(match.group("epoch")), path))
    return max(found)[1] if found else None


def compat_config(spectral: SpectralConfig, unet: UNetConfig, disc: DiscriminatorConfig, cfg: TrainConfig) -> Dict[str, Any]:
    """Config snapshot a privacy checkpoint must match to be resumed or reused."""
    train = cfg.to_dict()
    train.pop("epochs")
    return {"spectral": spectral.to_dict(), "unet": unet.to_dict(), "discriminator": disc.to_dict(), "train": train}


def write_run_snapshot(run_dir: Union[str, Path], experiment: ExperimentConfig, cfg: TrainConfig) -> Path:
    """Store the experiment config and the cell's TrainConfig inside the run directory."""
    run_dir = ensure_directory(run_dir)
    snapshot = experiment.to_dict()
    snapshot["train"] = cfg.to_dict()
    return atomic_write_json(run_dir / CONFIG_SNAPSHOT_FILE, snapshot)


def read_run_snapshot(run_dir: Union[str, Path]) -> Tuple[ExperimentConfig, TrainConfig]:
    """
    Config a run was trained with.

    Raises:
        DataError: If the run directory has no snapshot
    """
    path = Path(run_dir) / CONFIG_SNAPSHOT_FILE
    if not path.is_file():
        raise DataError(
            f"{run_dir} is not a run directory (no {CONFIG_SNAPSHOT_FILE})",
            error_code="SNAPSHOT_MISSING",
            details={"run_dir": str(run_dir)}
        )
    experiment = ExperimentConfig.from_dict(read_json(path))
    return experiment, experiment.train


def write_run_info(run_dir: Union[str, Path], **info: Any) -> Path:
    path = Path(run_dir) / RUN_INFO_FILE
    current = read_json(path) if path.is_file() else {}
    current.update(info)
    return atomic_write_json(path, current)


def read_run_info(run_dir: Union[str, Path]) -> Dict[str, Any]:
    path = Path(run_dir) / RUN_INFO_FILE
    return read_json(path) if path.is_file() else {}


def save_privacy_checkpoint(
    file_path: Union[str, Path],
    bundle: PrivacyModelBundle,
    trainer: Optional[PrivacyTrainer],
    logs: Sequence[StepLog],
    completed: bool = False
) -> Path:
    extra = {
        "step": bundle.step,
        "epoch": bundle.epoch,
        "mode": bundle.mode,
        "completed": completed,
        "global_rng": capture_rng_state(),
        "step_logs": [asdict(log) for log in logs],
    }
    if trainer is not None:
        extra["trainer"] = trainer.state()
    return save_checkpoint(file_path, "privacy", bundle.config, bundle.state_tensors(), extra)


def load_privacy_bundle(
    file_path: Union[str, Path],
    expected_config: Optional[Dict[str, Any]] = None,
    map_location: Union[str, torch.device] = "cpu"
) -> Tuple[PrivacyModelBundle, Dict[str, Any]]:
    """
    Rebuild a bundle from a privacy checkpoint.

    Returns:
        (bundle, checkpoint extra)

    Raises:
        CheckpointTypeError / CheckpointFormatError / CompatibilityError
    """
    payload = load_checkpoint(file_path, "privacy", expected_config=expected_config, map_location=map_location)
    config = payload["config"]
    bundle = PrivacyModelBundle.create(
        UNetConfig.from_dict(config["unet"]),
        DiscriminatorConfig.from_dict(config["discriminator"]),
        mode=payload["extra"]["mode"],
        config=config,
    )
    bundle.load_state_tensors(payload["tensors"])
    bundle.step = int(payload["extra"]["step"])
    bundle.epoch = int(payload["extra"]["epoch"])
    return bundle.eval(), payload["extra"]


@error_handler("privacy_training", reraise=True)
@log_step("train_privacy", "Adversarial privacy training")
def train(
    specs: np.ndarray,
    genders: np.ndarray,
    cfg: TrainConfig,
    spectral: SpectralConfig,
    unet: UNetConfig,
    disc: DiscriminatorConfig,
    run_dir: Optional[Union[str, Path]] = None,
    device: Optional[torch.device] = None,
    resume: bool = True
) -> Tuple[PrivacyModelBundle, List[StepLog]]:
    """
    Train one (epsilon, seed, mode) cell.

    Args:
        specs: (count, n_mels, T) normalized training spectrograms
        genders: (count,) sensitive attribute labels in {0, 1}
        cfg: Training hyperparameters of this cell
        spectral, unet, disc: Architecture settings
        run_dir: Directory for checkpoints and metrics.csv (None keeps
            everything in memory)
        device: Torch device
        resume: Continue from the latest checkpoint in run_dir

    Returns:
        (trained bundle, every StepLog of the run)

    Raises:
        TrainingFaultError: A loss became NaN/Inf (details hold the StepLog)
    """
    cfg.validate()
    device = device or torch.device("cpu")
    specs_t = torch.as_tensor(np.asarray(specs, dtype=np.float32))
    genders_t = torch.as_tensor(np.asarray(genders, dtype=np.int64))
    if specs_t.dim() != 3 or specs_t.shape[0] != genders_t.shape[0] or specs_t.shape[0] == 0:
        raise DimensionError(
            f"Need (count, n_mels, T) spectrograms with one label each, got {tuple(specs_t.shape)} "
            f"and {tuple(genders_t.shape)}",
            error_code="SHAPE_MISMATCH",
            details={"specs": list(specs_t.shape), "genders": list(genders_t.shape)}
        )

    seed_everything(cfg.seed)
    snapshot = compat_config(spectral, unet, disc, cfg)
    bundle = PrivacyModelBundle.create(unet, disc, mode=cfg.mode, config=snapshot, seed=cfg.seed).to(device)
    trainer = PrivacyTrainer(bundle, cfg, device)
    logs: List[StepLog] = []

    metrics = None
    if run_dir is not None:
        run_dir = ensure_directory(run_dir)
        ensure_directory(run_dir / CHECKPOINT_DIR)
        latest = latest_checkpoint(run_dir) if resume else None
        if latest is not None:
            payload = load_checkpoint(latest, "privacy", expected_config=snapshot, map_location=device)
            bundle.load_state_tensors(payload["tensors"])
            extra = payload["extra"]
            bundle.step = int(extra["step"])
            bundle.epoch = int(extra["epoch"])
            trainer.load_state(extra["trainer"])
            restore_rng_state(extra["global_rng"])
            logs = [StepLog(**row) for row in extra["step_logs"]]
            logger.info(f"Resuming {run_dir.name} from epoch {bundle.epoch} (step {bundle.step})")
        metrics = CsvStream(run_dir / METRICS_FILE, METRICS_COLUMNS)
        if latest is not None:
            metrics.truncate_after("step", bundle.step)
        elif not resume:
            metrics.truncate_after("step", 0)

    steps_per_epoch = cfg.steps_per_epoch or math.ceil(specs_t.shape[0] / cfg.batch_size)
    train_log.set_context(eps=cfg.epsilon, seed=cfg.seed, mode=cfg.mode)
    bundle.train()

    for epoch in range(bundle.epoch + 1, cfg.epochs + 1):
        for _ in range(steps_per_epoch):
            index = trainer.sample_indices(specs_t.shape[0])
            m = specs_t[index].to(device)
            s = genders_t[index].to(device)
            log = trainer.train_step(m, s, epoch)
            logs.append(log)
            if metrics is not None:
                metrics.append(log.to_row())
        bundle.epoch = epoch
        train_log.info("Epoch complete", epoch=epoch, **logs[-1].losses())

        if run_dir is not None and (epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs):
            save_privacy_checkpoint(
                run_dir / CHECKPOINT_DIR / checkpoint_name(epoch, cfg), bundle, trainer, logs,
                completed=epoch == cfg.epochs,
            )

    train_log.clear_context()
    return bundle.eval(), logs


def transform_values(
    values: np.ndarray,
    bundle: PrivacyModelBundle,
    s_syn: Optional[Sequence[int]] = None,
    seed: int = 0,
    device: Optional[torch.device] = None,
    batch_size: int = 64
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Apply F (and G for full bundles) to normalized spectrograms.

    z1 and z2 come from two generators seeded from seed, so m' does not
    depend on whether the bundle has a generator.

    Returns:
        (m', m'') as (count, n_mels, T) arrays; m'' is None for baseline bundles
    """
    device = device or torch.device("cpu")
    values = torch.as_tensor(np.asarray(values, dtype=np.float32))
    z1_rng = torch.Generator().manual_seed(seed)
    z2_rng = torch.Generator().manual_seed(seed + 1)
    full = bundle.generator is not None
    if full:
        if s_syn is None:
            raise DomainError(
                "A synthetic attribute per input is required for full bundles",
                error_code="MISSING_ATTRIBUTE"
            )
        s_syn = torch.as_tensor(np.asarray(s_syn, dtype=np.int64))

    bundle.to(device).eval()
    filtered, generated = [], []
    with torch.no_grad():
        for start in range(0, values.shape[0], batch_size):
            m = values[start:start + batch_size]
            z1 = torch.randn(m.shape, generator=z1_rng)
            m_prime = filter_forward(bundle.filter, m.to(device), z1.to(device))
            filtered.append(m_prime.cpu().numpy())
            if full:
                z2 = torch.randn(m.shape, generator=z2_rng)
                s = s_syn[start:start + batch_size].to(device)
                generated.append(generator_forward(bundle.generator, m_prime, s, z2.to(device)).cpu().numpy())

    empty = np.zeros((0,) + tuple(values.shape[1:]), dtype=np.float32)
    m_prime_all = np.concatenate(filtered) if filtered else empty
    m_dprime_all = (np.concatenate(generated) if generated else empty) if full else None
    return m_prime_all, m_dprime_all


@dataclass
class TransformResult:
    m: MelSpectrogram
    m_prime: MelSpectrogram
    m_dprime: Optional[MelSpectrogram]
    waveform: np.ndarray
    s_syn: Optional[int]

    @property
    def output(self) -> MelSpectrogram:
        return self.m_dprime if self.m_dprime is not None else self.m_prime


@error_handler("privacy_transform", reraise=True)
def transform(
    clip,
    bundle: PrivacyModelBundle,
    stats: NormStats,
    spectral: SpectralConfig,
    s_syn: Union[int, str] = "random",
    vocoder=None,
    seed: int = 0,
    device: Optional[torch.device] = None
) -> TransformResult:
    """
    STFT -> F -> G -> inversion for one prepared clip.

    Args:
        clip: Prepared AudioClip (spectral.sample_rate, spectral.num_samples)
        bundle: Trained privacy bundle
        stats: Normalization statistics of the training corpus
        spectral: Spectral settings
        s_syn: 0, 1 or "random" (drawn from seed)
        vocoder: Object with invert(MelSpectrogram); Griffin-Lim when None
        seed: Seed of the noise planes and of the random attribute

    Raises:
        PreparationError: Clip not at the expected rate/length
        DomainError: s_syn not in {0, 1, "random"}
    """
    if clip.sample_rate != spectral.sample_rate or clip.num_samples != spectral.num_samples:
        raise PreparationError(
            f"Clip must be prepared to {spectral.sample_rate} Hz / {spectral.num_samples} samples, "
            f"got {clip.sample_rate} Hz / {clip.num_samples} samples",
            error_code="UNPREPARED_CLIP",
            details={"sample_rate": clip.sample_rate, "num_samples": clip.num_samples}
        )
    if s_syn == "random":
        s_syn = int(draw_synthetic_attributes(1, seed)[0])
    elif s_syn not in (0, 1):
        raise DomainError(
            f"s_syn must be 0, 1 or 'random', got {s_syn!r}",
            error_code="BAD_ATTRIBUTE",
            details={"s_syn": s_syn}
        )
    if vocoder is None:
        from steps.step2_train_vocoder import GriffinLimVocoder
        vocoder = GriffinLimVocoder(spectral)

    m = mel_spectrogram(clip.samples, stats, spectral)
    full = bundle.generator is not None
    m_prime_values, m_dprime_values = transform_values(
        m.values[None], bundle, s_syn=[s_syn] if full else None, seed=seed, device=device
    )
    m_prime = m.with_values(m_prime_values[0])
    m_dprime = m.with_values(m_dprime_values[0]) if full else None
    final = m_dprime if full else m_prime
    waveform = np.asarray(vocoder.invert(final), dtype=np.float32)[:spectral.num_samples]
    return TransformResult(m=m, m_prime=m_prime, m_dprime=m_dprime, waveform=waveform, s_syn=s_syn if full else None)
