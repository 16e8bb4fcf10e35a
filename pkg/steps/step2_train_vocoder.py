"""
STEP 2: TRAIN VOCODER

Trains the MelGAN mel-spectrogram inverter against multi-scale hinge-loss
discriminators with a feature matching term, and exposes the learned and
Griffin-Lim inverters behind one invert() interface.
"""

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from helpers.checkpoints import load_checkpoint, save_checkpoint
from helpers.melgan import MelGANGenerator, MultiScaleDiscriminator, output_length
from helpers.spectral import MelSpectrogram, NormStats, griffin_lim_invert, stft_magnitude
from settings.experiment import SpectralConfig, VocoderConfig
from utils.error_handler import CompatibilityError, DimensionError, VocoderDivergenceError, error_handler
from utils.file_operations import file_sha256
from utils.gpu_manager import capture_rng_state, restore_rng_state
from utils.logging_utils import get_logger, get_structured_logger, log_step

logger = get_logger("vocoder")
train_log = get_structured_logger("vocoder.train")

EVAL_CLIPS = 8


@dataclass
class VocoderBundle:
    generator: MelGANGenerator
    discriminator: MultiScaleDiscriminator
    config: VocoderConfig
    spectral: SpectralConfig
    stats: NormStats
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def stats_fingerprint(self) -> str:
        return self.stats.fingerprint(self.spectral)

    def config_snapshot(self) -> Dict[str, Any]:
        return {"vocoder": self.config.to_dict(), "spectral": self.spectral.to_dict()}


def build_vocoder(config: VocoderConfig, spectral: SpectralConfig, stats: NormStats) -> VocoderBundle:
    config.validate(hop=spectral.hop)
    torch.manual_seed(config.seed)
    return VocoderBundle(
        generator=MelGANGenerator(spectral.n_mels, config),
        discriminator=MultiScaleDiscriminator(config),
        config=config,
        spectral=spectral,
        stats=stats,
    )


def check_stats(mspec: MelSpectrogram, bundle: VocoderBundle) -> None:
    """
    Raises:
        CompatibilityError: If mspec was normalized with other statistics than the vocoder's
    """
    found = mspec.stats.fingerprint(bundle.spectral)
    if found != bundle.stats_fingerprint:
        raise CompatibilityError(
            f"Spectrogram normalization {found[:12]} does not match the vocoder's {bundle.stats_fingerprint[:12]}",
            error_code="STATS_MISMATCH",
            details={"spectrogram": found, "vocoder": bundle.stats_fingerprint}
        )


def vocode_values(values: np.ndarray, bundle: VocoderBundle, batch_size: int = 32) -> np.ndarray:
    """
    Invert a batch of normalized spectrograms (count, n_mels, T).

    Returns:
        (count, num_samples) waveforms; generator output hop*T is cropped to
        the spectral config's clip length

    Raises:
        DimensionError: If T frames cannot cover the clip length
    """
    device = next(bundle.generator.parameters()).device
    values = np.asarray(values, dtype=np.float32)
    num_samples = bundle.spectral.num_samples
    if output_length(values.shape[-1], bundle.spectral.hop) < num_samples:
        raise DimensionError(
            f"{values.shape[-1]} frames give fewer than {num_samples} samples at hop {bundle.spectral.hop}",
            error_code="TOO_FEW_FRAMES",
            details={"frames": int(values.shape[-1]), "num_samples": num_samples}
        )
    outputs = []
    bundle.generator.eval()
    with torch.no_grad():
        for start in range(0, values.shape[0], batch_size):
            batch = torch.from_numpy(values[start:start + batch_size]).to(device)
            outputs.append(bundle.generator(batch)[:, :num_samples].cpu().numpy())
    if not outputs:
        return np.zeros((0, num_samples), dtype=np.float32)
    return np.concatenate(outputs)


def vocode(mspec: MelSpectrogram, bundle: VocoderBundle) -> np.ndarray:
    """
    Waveform for one normalized spectrogram.

    Raises:
        CompatibilityError: If mspec's normalization differs from the vocoder's
    """
    check_stats(mspec, bundle)
    return vocode_values(mspec.values[None], bundle)[0]


def disc_hinge_loss(real_score: torch.Tensor, fake_score: torch.Tensor) -> torch.Tensor:
    """
    mean(relu(1 - D(x))) + mean(relu(1 + D(x_hat))) for one discriminator.

    Raises:
        DimensionError: If the real and fake outputs differ in shape
    """
    if real_score.shape != fake_score.shape:
        raise DimensionError(
            f"Real and fake discriminator outputs differ: {tuple(real_score.shape)} vs {tuple(fake_score.shape)}",
            error_code="SHAPE_MISMATCH",
            details={"real": list(real_score.shape), "fake": list(fake_score.shape)}
        )
    return F.relu(1.0 - real_score).mean() + F.relu(1.0 + fake_score).mean()


def feature_matching_loss(real_outputs: Sequence[Sequence[torch.Tensor]], fake_outputs: Sequence[Sequence[torch.Tensor]]) -> torch.Tensor:
    """
    Sum over discriminators and intermediate layers (the final score map
    excluded) of the mean absolute feature difference. Real features are
    treated as constants.
    """
    loss = torch.zeros(())
    for real_layers, fake_layers in zip(real_outputs, fake_outputs):
        for real, fake in zip(real_layers[:-1], fake_layers[:-1]):
            if real.shape != fake.shape:
                raise DimensionError(
                    f"Feature maps differ in shape: {tuple(real.shape)} vs {tuple(fake.shape)}",
                    error_code="SHAPE_MISMATCH",
                    details={"real": list(real.shape), "fake": list(fake.shape)}
                )
            loss = loss.to(fake.device) + (real.detach() - fake).abs().mean()
    return loss


def generator_adversarial_loss(fake_outputs: Sequence[Sequence[torch.Tensor]]) -> torch.Tensor:
    """sum_k -mean(D_k(G(m)))"""
    return sum(-layers[-1].mean() for layers in fake_outputs)


def spectral_distance(reference: np.ndarray, estimate: np.ndarray, cfg: SpectralConfig) -> float:
    """Mean absolute difference between STFT magnitudes, averaged over clips."""
    distances = [
        float(np.mean(np.abs(stft_magnitude(est, cfg) - stft_magnitude(ref, cfg))))
        for ref, est in zip(reference, estimate)
    ]
    return float(np.mean(distances))


def _vocoder_extra(bundle: VocoderBundle, opt_g, opt_d, sampler: torch.Generator, step: int) -> Dict[str, Any]:
    return {
        "step": step,
        "stats": bundle.stats.to_dict(),
        "stats_fingerprint": bundle.stats_fingerprint,
        "optimizers": {"generator": opt_g.state_dict(), "discriminator": opt_d.state_dict()} if opt_g else {},
        "sampler_state": sampler.get_state() if sampler is not None else None,
        "global_rng": capture_rng_state(),
        "losses": bundle.metadata.get("losses", []),
        "evaluations": bundle.metadata.get("evaluations", []),
    }


def save_vocoder(
    bundle: VocoderBundle,
    file_path: Union[str, Path],
    opt_g: Optional[torch.optim.Optimizer] = None,
    opt_d: Optional[torch.optim.Optimizer] = None,
    sampler: Optional[torch.Generator] = None
) -> Path:
    tensors = {f"generator.{k}": v for k, v in bundle.generator.state_dict().items()}
    tensors.update({f"discriminator.{k}": v for k, v in bundle.discriminator.state_dict().items()})
    step = int(bundle.metadata.get("step", 0))
    return save_checkpoint(file_path, "vocoder", bundle.config_snapshot(), tensors, _vocoder_extra(bundle, opt_g, opt_d, sampler, step))


def _restore_bundle(payload: Dict[str, Any]) -> VocoderBundle:
    config = VocoderConfig.from_dict(payload["config"]["vocoder"])
    spectral = SpectralConfig.from_dict(payload["config"]["spectral"])
    stats = NormStats(**payload["extra"]["stats"])
    bundle = VocoderBundle(
        generator=MelGANGenerator(spectral.n_mels, config),
        discriminator=MultiScaleDiscriminator(config),
        config=config,
        spectral=spectral,
        stats=stats,
    )
    tensors = payload["tensors"]
    bundle.generator.load_state_dict({k[len("generator."):]: v for k, v in tensors.items() if k.startswith("generator.")})
    bundle.discriminator.load_state_dict({k[len("discriminator."):]: v for k, v in tensors.items() if k.startswith("discriminator.")})
    extra = payload["extra"]
    bundle.metadata = {
        "step": int(extra.get("step", 0)),
        "losses": list(extra.get("losses", [])),
        "evaluations": list(extra.get("evaluations", [])),
    }
    return bundle


def require_matching_stats(bundle: VocoderBundle, spectral: SpectralConfig, stats: NormStats, file_path: Union[str, Path]) -> None:
    """
    Raises:
        CompatibilityError: If the checkpoint was trained with other spectral settings or statistics
    """
    expected = stats.fingerprint(spectral)
    if expected != bundle.stats_fingerprint:
        raise CompatibilityError(
            f"Vocoder {file_path} was trained with normalization {bundle.stats_fingerprint}, "
            f"but this pipeline uses {expected}",
            error_code="STATS_MISMATCH",
            details={"checkpoint": bundle.stats_fingerprint, "expected": expected}
        )


def load_pretrained(
    file_path: Union[str, Path],
    spectral: Optional[SpectralConfig] = None,
    stats: Optional[NormStats] = None,
    map_location: Union[str, torch.device] = "cpu"
) -> VocoderBundle:
    """
    Load a vocoder checkpoint.

    Args:
        file_path: Checkpoint path
        spectral, stats: When given, the checkpoint's normalization fingerprint
            must match these

    Raises:
        CheckpointFormatError: Truncated or foreign file
        CheckpointTypeError: Not a vocoder checkpoint
        CompatibilityError: Normalization fingerprint mismatch (both printed)
    """
    payload = load_checkpoint(file_path, "vocoder", map_location=map_location)
    bundle = _restore_bundle(payload)
    if spectral is not None and stats is not None:
        require_matching_stats(bundle, spectral, stats, file_path)
    bundle.metadata["checkpoint_sha256"] = file_sha256(file_path)
    bundle.generator.eval()
    return bundle


@error_handler("vocoder", reraise=True)
@log_step("train_vocoder", "Training mel-spectrogram vocoder")
def train_vocoder(
    waveforms: np.ndarray,
    mel_values: np.ndarray,
    config: VocoderConfig,
    spectral: SpectralConfig,
    stats: NormStats,
    device: Optional[torch.device] = None,
    checkpoint_path: Optional[Union[str, Path]] = None,
    resume_from: Optional[Union[str, Path]] = None,
    log_every: int = 50
) -> VocoderBundle:
    """
    Alternate discriminator (hinge) and generator (adversarial + feature
    matching) updates for config.steps steps.

    Args:
        waveforms: (count, num_samples) prepared clips
        mel_values: (count, n_mels, T) matching normalized spectrograms
        config: Vocoder settings (steps, batch size, learning rate, ...)
        spectral: Spectral settings the mels were computed with
        stats: Normalization statistics of the mels
        device: Torch device, CPU by default
        checkpoint_path: Final checkpoint destination
        resume_from: Continue a run from its checkpoint (optimizer and
            sampler states included)

    Raises:
        VocoderDivergenceError: Non-finite loss, or a loss above the
            divergence threshold for divergence_window consecutive steps
        CompatibilityError: resume_from was trained with other spectral
            settings or normalization statistics
    """
    device = device or torch.device("cpu")
    waveforms = torch.as_tensor(np.asarray(waveforms, dtype=np.float32))
    mels = torch.as_tensor(np.asarray(mel_values, dtype=np.float32))
    if waveforms.shape[0] != mels.shape[0] or waveforms.shape[0] == 0:
        raise DimensionError(
            f"Need matching non-empty waveform/mel sets, got {waveforms.shape[0]} and {mels.shape[0]}",
            error_code="SHAPE_MISMATCH",
            details={"waveforms": waveforms.shape[0], "mels": mels.shape[0]}
        )

    sampler = torch.Generator().manual_seed(config.seed)
    if resume_from is not None:
        payload = load_checkpoint(resume_from, "vocoder")
        bundle = _restore_bundle(payload)
        require_matching_stats(bundle, spectral, stats, resume_from)
        bundle.config = config
    else:
        payload = None
        bundle = build_vocoder(config, spectral, stats)
        bundle.metadata = {"step": 0, "losses": [], "evaluations": []}

    bundle.generator.to(device).train()
    bundle.discriminator.to(device).train()
    opt_g = torch.optim.Adam(bundle.generator.parameters(), lr=config.lr, betas=config.betas)
    opt_d = torch.optim.Adam(bundle.discriminator.parameters(), lr=config.lr, betas=config.betas)
    if payload is not None:
        extra = payload["extra"]
        if extra.get("optimizers"):
            opt_g.load_state_dict(extra["optimizers"]["generator"])
            opt_d.load_state_dict(extra["optimizers"]["discriminator"])
        if extra.get("sampler_state") is not None:
            sampler.set_state(extra["sampler_state"])
        restore_rng_state(extra.get("global_rng", {}))
        logger.info(f"Resuming vocoder training from step {bundle.metadata['step']}")

    eval_count = min(EVAL_CLIPS, waveforms.shape[0])
    eval_waves = waveforms[:eval_count].numpy()
    eval_mels = mels[:eval_count].numpy()

    def _evaluate(step: int) -> None:
        distance = spectral_distance(eval_waves, vocode_values(eval_mels, bundle), spectral)
        bundle.metadata["evaluations"].append({"step": step, "spectral_distance": distance})
        train_log.info("Spectral distance", step=step, spectral_distance=distance)
        bundle.generator.train()

    if not bundle.metadata["evaluations"]:
        _evaluate(bundle.metadata["step"])

    over_threshold = 0
    num_samples = spectral.num_samples
    for step in range(bundle.metadata["step"] + 1, config.steps + 1):
        index = torch.randint(waveforms.shape[0], (config.batch_size,), generator=sampler)
        real = waveforms[index].to(device)
        mel = mels[index].to(device)

        fake = bundle.generator(mel)[:, :num_samples]

        opt_d.zero_grad()
        real_outputs = bundle.discriminator(real)
        fake_outputs = bundle.discriminator(fake.detach())
        loss_d = sum(disc_hinge_loss(r[-1], f[-1]) for r, f in zip(real_outputs, fake_outputs))
        loss_d.backward()
        opt_d.step()

        opt_g.zero_grad()
        fake_outputs = bundle.discriminator(fake)
        real_outputs = [[feature.detach() for feature in layers] for layers in bundle.discriminator(real)]
        adversarial = generator_adversarial_loss(fake_outputs)
        matching = feature_matching_loss(real_outputs, fake_outputs)
        loss_g = adversarial + config.feature_match_weight * matching
        loss_g.backward()
        opt_g.step()

        record = {
            "step": step,
            "loss_d": float(loss_d.item()),
            "loss_g": float(loss_g.item()),
            "loss_fm": float(matching.item()),
        }
        bundle.metadata["losses"].append(record)
        bundle.metadata["step"] = step

        if not all(math.isfinite(record[key]) for key in ("loss_d", "loss_g")):
            raise VocoderDivergenceError(
                f"Non-finite vocoder loss at step {step}",
                error_code="NON_FINITE_LOSS",
                details=record
            )
        if max(abs(record["loss_d"]), abs(record["loss_g"])) > config.divergence_threshold:
            over_threshold += 1
            if over_threshold >= config.divergence_window:
                raise VocoderDivergenceError(
                    f"Vocoder loss above {config.divergence_threshold} for {over_threshold} consecutive steps",
                    error_code="DIVERGED",
                    details=record
                )
        else:
            over_threshold = 0

        if step % log_every == 0:
            train_log.info("Vocoder step", **record)
        if step % config.eval_every == 0 or step == config.steps:
            _evaluate(step)

    bundle.generator.eval()
    if checkpoint_path is not None:
        save_vocoder(bundle, checkpoint_path, opt_g, opt_d, sampler)
        bundle.metadata["checkpoint_sha256"] = file_sha256(checkpoint_path)
    return bundle


class GriffinLimVocoder:
    """Deterministic fallback inverter."""

    name = "griffin-lim"

    def __init__(self, spectral: SpectralConfig):
        self.spectral = spectral

    @property
    def checkpoint_hash(self) -> str:
        return f"griffin-lim:{self.spectral.griffin_lim_iters}:{self.spectral.griffin_lim_seed}"

    def invert(self, mspec: MelSpectrogram) -> np.ndarray:
        return griffin_lim_invert(mspec, self.spectral).astype(np.float32)

    def invert_batch(self, values: np.ndarray, stats: NormStats) -> np.ndarray:
        return np.stack([
            self.invert(MelSpectrogram(v, stats.mean, stats.scale, self.spectral.sample_rate, self.spectral.clip_sigmas))
            for v in values
        ]) if len(values) else np.zeros((0, self.spectral.num_samples), dtype=np.float32)


class LearnedVocoder:
    """MelGAN inverter; checks the normalization fingerprint on every call."""

    name = "melgan"

    def __init__(self, bundle: VocoderBundle):
        self.bundle = bundle
        self.spectral = bundle.spectral

    @property
    def checkpoint_hash(self) -> str:
        return self.bundle.metadata.get("checkpoint_sha256", "untracked")

    def invert(self, mspec: MelSpectrogram) -> np.ndarray:
        return vocode(mspec, self.bundle)

    def invert_batch(self, values: np.ndarray, stats: NormStats) -> np.ndarray:
        check_stats(MelSpectrogram(values[:1], stats.mean, stats.scale, self.spectral.sample_rate), self.bundle)
        return vocode_values(values, self.bundle)
