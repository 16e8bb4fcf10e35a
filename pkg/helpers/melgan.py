"""
MELGAN

Feed-forward mel-spectrogram inverter and its multi-scale waveform
discriminator. Convolutions use weight normalization.

Generator output length is hop * T samples (product of the upsampling
factors times the number of frames); callers crop to the clip length.
"""

from typing import List

import torch
import torch.nn as nn
from torch.nn.utils.parametrizations import weight_norm

from settings.experiment import VocoderConfig
from utils.error_handler import DimensionError


def WNConv1d(*args, **kwargs) -> nn.Module:
    return weight_norm(nn.Conv1d(*args, **kwargs))


def WNConvTranspose1d(*args, **kwargs) -> nn.Module:
    return weight_norm(nn.ConvTranspose1d(*args, **kwargs))


class ResnetBlock(nn.Module):
    def __init__(self, dim: int, dilation: int = 1):
        super().__init__()
        self.block = nn.Sequential(
            nn.LeakyReLU(0.2),
            nn.ReflectionPad1d(dilation),
            WNConv1d(dim, dim, kernel_size=3, dilation=dilation),
            nn.LeakyReLU(0.2),
            WNConv1d(dim, dim, kernel_size=1),
        )
        self.shortcut = WNConv1d(dim, dim, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.shortcut(x) + self.block(x)


class MelGANGenerator(nn.Module):
    """(batch, n_mels, T) normalized mel -> (batch, hop * T) waveform in [-1, 1]."""

    def __init__(self, n_mels: int, config: VocoderConfig):
        super().__init__()
        self.n_mels = n_mels
        self.hop = config.hop
        mult = 2 ** len(config.upsample_factors)

        model = [
            nn.ReflectionPad1d(3),
            WNConv1d(n_mels, mult * config.ngf, kernel_size=7),
        ]
        for factor in config.upsample_factors:
            model += [
                nn.LeakyReLU(0.2),
                WNConvTranspose1d(
                    mult * config.ngf,
                    mult * config.ngf // 2,
                    kernel_size=factor * 2,
                    stride=factor,
                    padding=factor // 2 + factor % 2,
                    output_padding=factor % 2,
                ),
            ]
            for j in range(config.n_residual_layers):
                model += [ResnetBlock(mult * config.ngf // 2, dilation=3 ** j)]
            mult //= 2

        model += [
            nn.LeakyReLU(0.2),
            nn.ReflectionPad1d(3),
            WNConv1d(config.ngf, 1, kernel_size=7),
            nn.Tanh(),
        ]
        self.model = nn.Sequential(*model)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        if mel.dim() != 3 or mel.shape[1] != self.n_mels:
            raise DimensionError(
                f"vocoder: expected (batch, {self.n_mels}, T) input, got shape {tuple(mel.shape)}",
                error_code="BAD_INPUT_RANK",
                details={"shape": list(mel.shape), "n_mels": self.n_mels}
            )
        return self.model(mel).squeeze(1)


class NLayerDiscriminator(nn.Module):
    """Strided grouped-convolution discriminator returning every layer's output."""

    def __init__(self, ndf: int, n_layers: int, stride: int, max_channels: int):
        super().__init__()
        layers = nn.ModuleList()
        layers.append(nn.Sequential(
            nn.ReflectionPad1d(7),
            WNConv1d(1, ndf, kernel_size=15),
            nn.LeakyReLU(0.2),
        ))

        channels = ndf
        for _ in range(n_layers):
            previous = channels
            channels = min(channels * stride, max_channels)
            layers.append(nn.Sequential(
                WNConv1d(
                    previous,
                    channels,
                    kernel_size=stride * 10 + 1,
                    stride=stride,
                    padding=stride * 5,
                    groups=max(previous // 4, 1),
                ),
                nn.LeakyReLU(0.2),
            ))

        previous = channels
        channels = min(channels * 2, max_channels)
        layers.append(nn.Sequential(
            WNConv1d(previous, channels, kernel_size=5, stride=1, padding=2),
            nn.LeakyReLU(0.2),
        ))
        layers.append(WNConv1d(channels, 1, kernel_size=3, stride=1, padding=1))
        self.layers = layers

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        outputs = []
        for layer in self.layers:
            x = layer(x)
            outputs.append(x)
        return outputs


class MultiScaleDiscriminator(nn.Module):
    """
    num_discriminators NLayerDiscriminators; discriminator k sees the waveform
    average-pooled k-1 times by disc_downsample_factor.

    forward returns one list per scale: intermediate feature maps followed by
    the score map.
    """

    def __init__(self, config: VocoderConfig):
        super().__init__()
        self.discriminators = nn.ModuleList([
            NLayerDiscriminator(config.ndf, config.disc_layers, config.disc_stride, config.disc_max_channels)
            for _ in range(config.num_discriminators)
        ])
        factor = config.disc_downsample_factor
        self.downsample = nn.AvgPool1d(
            kernel_size=2 * factor,
            stride=factor,
            padding=factor // 2,
            count_include_pad=False,
        )

    def forward(self, waveform: torch.Tensor) -> List[List[torch.Tensor]]:
        x = waveform.unsqueeze(1) if waveform.dim() == 2 else waveform
        results = []
        for index, discriminator in enumerate(self.discriminators):
            if index > 0:
                x = self.downsample(x)
            results.append(discriminator(x))
        return results


def output_length(num_frames: int, hop: int) -> int:
    """Generator output length for num_frames input frames."""
    return num_frames * hop
