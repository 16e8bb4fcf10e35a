"""
NETWORKS

Parametric families for the privacy pipeline:

* UNet-based FilterNet (inputs: spectrogram, noise plane) and GeneratorNet
  (inputs: filtered spectrogram, noise plane, constant +-1 attribute plane)
* AlexNet-style spectrogram discriminator / classifier
* AudioNet 1-D convolutional waveform classifier with an embedding for FID

Losses live in steps.step3_train_privacy.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from settings.experiment import AudioNetConfig, DiscriminatorConfig, UNetConfig
from utils.error_handler import ConfigurationError, DimensionError, DomainError
from utils.logging_config import get_logger

logger = get_logger("networks")

TASK_CLASSES = {"digit": 10, "gender": 2}
DOMAINS = ("spectrogram", "audio")
FAKE_CLASS = 2


def init_weights(module: nn.Module, negative_slope: float = 0.2) -> None:
    """Fan-in scaled centered normal for conv/linear weights, zero biases."""
    if isinstance(module, (nn.Conv1d, nn.Conv2d, nn.ConvTranspose1d, nn.ConvTranspose2d, nn.Linear)):
        nn.init.kaiming_normal_(module.weight, a=negative_slope, mode="fan_in", nonlinearity="leaky_relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)


class DoubleConv(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, negative_slope: float):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            nn.BatchNorm2d(out_channels),
            nn.LeakyReLU(negative_slope),
            nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1),
            nn.BatchNorm2d(out_channels),
            nn.LeakyReLU(negative_slope),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class UNet(nn.Module):
    """
    Encoder/decoder with skip connections and a tanh output.

    Inputs are zero-padded on both spatial axes to the next multiple of
    2**depth and the output is cropped back, so any (n_mels, T) works.
    """

    def __init__(self, in_channels: int, config: UNetConfig):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        widths = [config.base_channels * 2 ** i for i in range(config.depth)]

        self.down = nn.ModuleList()
        previous = in_channels
        for width in widths:
            self.down.append(DoubleConv(previous, width, config.leaky_slope))
            previous = width
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = DoubleConv(previous, previous * 2, config.leaky_slope)

        self.up = nn.ModuleList()
        self.up_conv = nn.ModuleList()
        previous = previous * 2
        for width in reversed(widths):
            self.up.append(nn.ConvTranspose2d(previous, width, kernel_size=2, stride=2))
            self.up_conv.append(DoubleConv(width * 2, width, config.leaky_slope))
            previous = width
        self.head = nn.Conv2d(previous, config.out_channels, kernel_size=1)

        self.apply(lambda m: init_weights(m, config.leaky_slope))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        multiple = self.config.multiple
        pad_h = (-height) % multiple
        pad_w = (-width) % multiple
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h))

        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, conv, skip in zip(self.up, self.up_conv, reversed(skips)):
            x = conv(torch.cat([up(x), skip], dim=1))

        return torch.tanh(self.head(x))[..., :height, :width]


def _check_planes(name: str, reference: torch.Tensor, other: torch.Tensor) -> None:
    if reference.dim() != 3:
        raise DimensionError(
            f"{name}: expected a (batch, n_mels, T) tensor, got shape {tuple(reference.shape)}",
            error_code="BAD_INPUT_RANK",
            details={"shape": list(reference.shape)}
        )
    if other.shape != reference.shape:
        raise DimensionError(
            f"{name}: noise shape {tuple(other.shape)} does not match input shape {tuple(reference.shape)}",
            error_code="SHAPE_MISMATCH",
            details={"input": list(reference.shape), "noise": list(other.shape)}
        )


class FilterNet(nn.Module):
    """F(m, z1) -> m' with the noise injected as a second input channel."""

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.unet = UNet(2, config)

    def forward(self, m: torch.Tensor, z1: torch.Tensor) -> torch.Tensor:
        _check_planes("filter", m, z1)
        return self.unet(torch.stack([m, z1], dim=1)).squeeze(1)


class GeneratorNet(nn.Module):
    """G(m', s', z2) -> m'' with the attribute as a constant -1/+1 plane."""

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.unet = UNet(3, config)

    def forward(self, m_prime: torch.Tensor, s_syn: torch.Tensor, z2: torch.Tensor) -> torch.Tensor:
        _check_planes("generator", m_prime, z2)
        s_syn = torch.as_tensor(s_syn, device=m_prime.device).reshape(-1)
        if s_syn.numel() != m_prime.shape[0]:
            raise DimensionError(
                f"generator: {s_syn.numel()} attribute values for a batch of {m_prime.shape[0]}",
                error_code="SHAPE_MISMATCH",
                details={"attributes": s_syn.numel(), "batch": m_prime.shape[0]}
            )
        if not torch.all((s_syn == 0) | (s_syn == 1)):
            raise DomainError(
                "Synthetic attribute values must be 0 or 1",
                error_code="BAD_ATTRIBUTE",
                details={"values": sorted(set(s_syn.tolist()))}
            )
        plane = (2.0 * s_syn.to(m_prime.dtype) - 1.0).view(-1, 1, 1).expand_as(m_prime)
        return self.unet(torch.stack([m_prime, z2, plane], dim=1)).squeeze(1)


class AlexNetDiscriminator(nn.Module):
    """
    AlexNet-style classifier scaled down for single-channel n_mels x T inputs:
    five convolutions (5x5, 5x5, 3x3, 3x3, 3x3) with three 3x3/2 max pools,
    an adaptive average pool and two hidden dense layers. Returns logits.
    """

    def __init__(self, num_classes: int, config: DiscriminatorConfig):
        super().__init__()
        self.num_classes = num_classes
        self.task: Optional[str] = None
        self.domain = "spectrogram"
        c1, c2, c3, c4, c5 = config.channels
        self.features = nn.Sequential(
            nn.Conv2d(1, c1, kernel_size=5, padding=2),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
            nn.Conv2d(c1, c2, kernel_size=5, padding=2),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
            nn.Conv2d(c2, c3, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c3, c4, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c4, c5, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
        )
        self.pool = nn.AdaptiveAvgPool2d(tuple(config.pool_output))
        pooled = c5 * config.pool_output[0] * config.pool_output[1]
        self.classifier = nn.Sequential(
            nn.Dropout(config.dropout),
            nn.Linear(pooled, config.hidden),
            nn.ReLU(inplace=True),
            nn.Dropout(config.dropout),
            nn.Linear(config.hidden, config.hidden),
            nn.ReLU(inplace=True),
            nn.Linear(config.hidden, num_classes),
        )
        self.apply(lambda m: init_weights(m, 0.0))

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        if m.dim() != 3:
            raise DimensionError(
                f"discriminator: expected a (batch, n_mels, T) tensor, got shape {tuple(m.shape)}",
                error_code="BAD_INPUT_RANK",
                details={"shape": list(m.shape)}
            )
        x = self.pool(self.features(m.unsqueeze(1)))
        return self.classifier(torch.flatten(x, 1))


class AudioNet(nn.Module):
    """
    Raw-waveform classifier: Conv1d/BatchNorm/ReLU/MaxPool stages followed by
    a dense head. embed() returns the flattened last convolutional map.
    """

    def __init__(self, num_classes: int, config: AudioNetConfig):
        super().__init__()
        self.num_classes = num_classes
        self.task: Optional[str] = None
        self.domain = "audio"
        self.input_length = config.input_length

        layers = []
        previous = 1
        for width in config.channels:
            layers += [
                nn.Conv1d(previous, width, kernel_size=3, padding=1),
                nn.BatchNorm1d(width),
                nn.ReLU(inplace=True),
                nn.MaxPool1d(config.pool),
            ]
            previous = width
        self.features = nn.Sequential(*layers)
        self.embedding_dim = config.embedding_dim
        self.classifier = nn.Sequential(
            nn.Linear(self.embedding_dim, config.hidden),
            nn.ReLU(inplace=True),
            nn.Dropout(config.dropout),
            nn.Linear(config.hidden, num_classes),
        )
        self.apply(lambda m: init_weights(m, 0.0))

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 2 or x.shape[-1] != self.input_length:
            raise DimensionError(
                f"audionet: expected (batch, {self.input_length}) waveforms, got shape {tuple(x.shape)}",
                error_code="BAD_WAVEFORM_SHAPE",
                details={"shape": list(x.shape), "input_length": self.input_length}
            )
        return torch.flatten(self.features(x.unsqueeze(1)), 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.embed(x))


def build_classifier(
    task: str,
    domain: str,
    disc_config: DiscriminatorConfig,
    audio_config: AudioNetConfig
) -> nn.Module:
    """Fixed evaluation classifier for a (task, domain) pair."""
    if task not in TASK_CLASSES:
        raise ConfigurationError(
            f"Unknown classifier task {task!r}",
            error_code="INVALID_CHOICE",
            details={"task": task, "choices": list(TASK_CLASSES)}
        )
    if domain == "spectrogram":
        model = AlexNetDiscriminator(TASK_CLASSES[task], disc_config)
    elif domain == "audio":
        model = AudioNet(TASK_CLASSES[task], audio_config)
    else:
        raise ConfigurationError(
            f"Unknown classifier domain {domain!r}",
            error_code="INVALID_CHOICE",
            details={"domain": domain, "choices": list(DOMAINS)}
        )
    model.task = task
    return model


def filter_forward(model: FilterNet, m: torch.Tensor, z1: torch.Tensor) -> torch.Tensor:
    return model(m, z1)


def generator_forward(model: GeneratorNet, m_prime: torch.Tensor, s_syn: torch.Tensor, z2: torch.Tensor) -> torch.Tensor:
    return model(m_prime, s_syn, z2)


def discriminator_forward(model: AlexNetDiscriminator, m: torch.Tensor) -> torch.Tensor:
    """Class probabilities (softmax over logits), one row per input."""
    return torch.softmax(model(m), dim=-1)


def classifier_forward(model: nn.Module, inputs: torch.Tensor, task: str) -> torch.Tensor:
    """
    Class probabilities of a fixed classifier.

    Raises:
        ConfigurationError: If the classifier was built for another task or
            the input does not match the classifier's domain
    """
    if getattr(model, "task", None) != task:
        raise ConfigurationError(
            f"Classifier was trained for task {getattr(model, 'task', None)!r}, not {task!r}",
            error_code="TASK_MISMATCH",
            details={"expected": task, "actual": getattr(model, "task", None)}
        )
    expected_rank = 3 if model.domain == "spectrogram" else 2
    if inputs.dim() != expected_rank:
        raise ConfigurationError(
            f"{model.domain} classifier received input of shape {tuple(inputs.shape)}",
            error_code="DOMAIN_MISMATCH",
            details={"domain": model.domain, "shape": list(inputs.shape)}
        )
    return torch.softmax(model(inputs), dim=-1)


@dataclass
class PrivacyModelBundle:
    """
    Filter, generator and their discriminators plus the config snapshot they
    were built from. Baseline bundles carry no generator and no D_G.
    """

    filter: FilterNet
    disc_filter: AlexNetDiscriminator
    generator: Optional[GeneratorNet] = None
    disc_gen: Optional[AlexNetDiscriminator] = None
    config: Dict = field(default_factory=dict)
    step: int = 0
    epoch: int = 0

    @classmethod
    def create(
        cls,
        unet_config: UNetConfig,
        disc_config: DiscriminatorConfig,
        mode: str = "full",
        config: Optional[Dict] = None,
        seed: Optional[int] = None
    ) -> "PrivacyModelBundle":
        if seed is not None:
            torch.manual_seed(seed)
        full = mode == "full"
        bundle = cls(
            filter=FilterNet(unet_config),
            disc_filter=AlexNetDiscriminator(2, disc_config),
            generator=GeneratorNet(unet_config) if full else None,
            disc_gen=AlexNetDiscriminator(3, disc_config) if full else None,
            config=dict(config or {}),
        )
        logger.debug(f"Created {mode} bundle with {bundle.parameter_count()} parameters")
        return bundle

    @property
    def mode(self) -> str:
        return "full" if self.generator is not None else "baseline"

    def named_modules(self) -> Iterator[Tuple[str, nn.Module]]:
        for name in ("filter", "generator", "disc_filter", "disc_gen"):
            module = getattr(self, name)
            if module is not None:
                yield name, module

    def to(self, device: torch.device) -> "PrivacyModelBundle":
        for _, module in self.named_modules():
            module.to(device)
        return self

    def train(self) -> "PrivacyModelBundle":
        for _, module in self.named_modules():
            module.train()
        return self

    def eval(self) -> "PrivacyModelBundle":
        for _, module in self.named_modules():
            module.eval()
        return self

    def parameter_count(self) -> int:
        return sum(p.numel() for _, module in self.named_modules() for p in module.parameters())

    def state_tensors(self) -> Dict[str, torch.Tensor]:
        """Flat {"<module>.<param>": tensor} map of every module's state."""
        tensors = {}
        for name, module in self.named_modules():
            for key, value in module.state_dict().items():
                tensors[f"{name}.{key}"] = value.detach().cpu()
        return tensors

    def load_state_tensors(self, tensors: Dict[str, torch.Tensor]) -> None:
        for name, module in self.named_modules():
            prefix = f"{name}."
            module.load_state_dict({k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)})
