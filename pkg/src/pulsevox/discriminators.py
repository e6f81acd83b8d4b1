"""Waveform discriminators: period-folding bank (MPD) and
multi-resolution spectrogram bank (MRSD).

Every sub-discriminator returns its score map and the feature map after
each convolution (the last feature map is the score map itself); the
feature lists feed the feature-matching loss, so the structure is
identical between a real and a fake forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

from .config import MpdConfig, MrsdConfig
from .errors import InvalidInput
from .spectral import log_compress, stft_magnitude


@dataclass
class DiscriminatorOutput:
    scores: list[torch.Tensor]
    features: list[list[torch.Tensor]]

    def __post_init__(self) -> None:
        if len(self.scores) != len(self.features):
            raise InvalidInput("one feature list per score map required")


def reshape_period(wave: torch.Tensor, period: int) -> torch.Tensor:
    """Fold (..., T) into (..., ceil(T / period), period), zero-padding the tail."""
    if period < 1:
        raise InvalidInput(f"period must be >= 1, got {period}")
    length = wave.shape[-1]
    rows = -(-length // period)
    pad = rows * period - length
    if pad:
        wave = torch.nn.functional.pad(wave, (0, pad))
    return wave.reshape(*wave.shape[:-1], rows, period)


class PeriodDiscriminator(nn.Module):
    def __init__(self, period: int, cfg: MpdConfig):
        super().__init__()
        self.period = period
        self.slope = cfg.lrelu_slope
        k, s = cfg.kernel_size, cfg.stride
        convs = []
        prev = 1
        for ch in cfg.channels:
            convs.append(weight_norm(nn.Conv2d(prev, ch, (k, 1), (s, 1), ((k - 1) // 2, 0))))
            prev = ch
        self.convs = nn.ModuleList(convs)
        self.post = weight_norm(nn.Conv2d(prev, 1, (3, 1), 1, (1, 0)))

    def forward(self, wave: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        x = reshape_period(wave, self.period).unsqueeze(1)  # (B, 1, rows, period)
        features = []
        for conv in self.convs:
            x = torch.nn.functional.leaky_relu(conv(x), self.slope)
            features.append(x)
        x = self.post(x)
        features.append(x)
        return x, features


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, cfg: MpdConfig):
        super().__init__()
        self.cfg = cfg
        self.subs = nn.ModuleList(PeriodDiscriminator(p, cfg) for p in cfg.periods)

    def forward(self, wave: torch.Tensor) -> DiscriminatorOutput:
        if wave.dim() == 1:
            wave = wave.unsqueeze(0)
        if wave.shape[-1] < max(self.cfg.periods):
            raise InvalidInput(
                f"waveform of {wave.shape[-1]} samples is shorter than the largest period"
            )
        scores, features = [], []
        for sub in self.subs:
            s, f = sub(wave)
            scores.append(s)
            features.append(f)
        return DiscriminatorOutput(scores=scores, features=features)


class SpectrogramDiscriminator(nn.Module):
    def __init__(self, resolution: tuple[int, int, int], cfg: MrsdConfig):
        super().__init__()
        self.resolution = resolution
        self.slope = cfg.lrelu_slope
        self.log_floor = cfg.log_floor
        k = cfg.kernel_size
        convs = []
        prev = 1
        for ch, stride in zip(cfg.channels, cfg.strides):
            convs.append(weight_norm(nn.Conv2d(prev, ch, k, stride, (k - 1) // 2)))
            prev = ch
        self.convs = nn.ModuleList(convs)

    def forward(self, wave: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        fft, win, hop = self.resolution
        spec = log_compress(stft_magnitude(wave, fft, win, hop), self.log_floor)
        x = spec.unsqueeze(1)  # (B, 1, frames, bins)
        features = []
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = torch.nn.functional.leaky_relu(x, self.slope)
            features.append(x)
        return x, features


class MultiResolutionSpectrogramDiscriminator(nn.Module):
    def __init__(self, cfg: MrsdConfig):
        super().__init__()
        self.cfg = cfg
        self.subs = nn.ModuleList(SpectrogramDiscriminator(r, cfg) for r in cfg.resolutions)

    def forward(self, wave: torch.Tensor) -> DiscriminatorOutput:
        if wave.dim() == 1:
            wave = wave.unsqueeze(0)
        largest = max(win for _, win, _ in self.cfg.resolutions)
        if wave.shape[-1] < largest:
            raise InvalidInput(
                f"waveform of {wave.shape[-1]} samples is shorter than the largest "
                f"spectrogram window ({largest})"
            )
        scores, features = [], []
        for sub in self.subs:
            s, f = sub(wave)
            scores.append(s)
            features.append(f)
        return DiscriminatorOutput(scores=scores, features=features)


class Discriminators(nn.Module):
    """MPD + MRSD evaluated together; outputs concatenated MPD-first."""

    def __init__(self, mpd_cfg: MpdConfig, mrsd_cfg: MrsdConfig):
        super().__init__()
        self.mpd = MultiPeriodDiscriminator(mpd_cfg)
        self.mrsd = MultiResolutionSpectrogramDiscriminator(mrsd_cfg)

    def forward(self, wave: torch.Tensor) -> DiscriminatorOutput:
        a = self.mpd(wave)
        b = self.mrsd(wave)
        return DiscriminatorOutput(scores=a.scores + b.scores, features=a.features + b.features)
