"""Dilated gated-CNN waveform generator with frame-to-sample upsampling.

The main input is frame-rate noise, upsampled to sample rate by a stack
of nearest-neighbor + convolution stages; the acoustic condition
(mel + logF0) goes through an architecturally identical upsampler with
its own weights, is concatenated with the excitation pulse channel, and
enters every gated layer through 1x1 convolutions. Synthesis is
non-causal: every convolution uses symmetric padding.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

from .config import GeneratorConfig
from .errors import InvalidInput


def nearest_upsample(x: torch.Tensor, factor: int) -> torch.Tensor:
    """Repeat each time step ``factor`` times along the last axis."""
    return torch.repeat_interleave(x, factor, dim=-1)


class ConditionUpsampler(nn.Module):
    """(B, in_channels, frames) -> (B, channels, frames * prod(factors)).

    Each stage: nearest-neighbor upsample by f, conv of kernel 2f + 1,
    leaky ReLU.
    """

    def __init__(self, in_channels: int, channels: int, factors: tuple[int, ...], slope: float = 0.2):
        super().__init__()
        self.factors = tuple(factors)
        self.slope = slope
        convs = []
        prev = in_channels
        for f in self.factors:
            convs.append(weight_norm(nn.Conv1d(prev, channels, 2 * f + 1, padding=f)))
            prev = channels
        self.convs = nn.ModuleList(convs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for f, conv in zip(self.factors, self.convs):
            x = nearest_upsample(x, f)
            x = torch.nn.functional.leaky_relu(conv(x), self.slope)
        return x


class DilatedConv1d(nn.Module):
    """Same-padded dilated convolution.

    A dilation-d kernel only ever combines samples of equal index mod d,
    so for large dilations the input is folded into d interleaved streams
    and convolved at dilation 1, which trains substantially faster on CPU
    (the crossover sits around d = 8). Output matches
    nn.Conv1d(..., dilation=d, padding=(k-1)//2*d) exactly.
    """

    FOLD_THRESHOLD = 8

    def __init__(self, in_channels: int, out_channels: int, kernel: int, dilation: int):
        super().__init__()
        self.dilation = dilation
        self.fold = dilation >= self.FOLD_THRESHOLD
        conv_dilation = 1 if self.fold else dilation
        self.conv = weight_norm(
            nn.Conv1d(
                in_channels,
                out_channels,
                kernel,
                dilation=conv_dilation,
                padding=(kernel - 1) // 2 * conv_dilation,
            )
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.fold:
            return self.conv(x)
        d = self.dilation
        batch, channels, length = x.shape
        pad = (-length) % d
        if pad:
            x = torch.nn.functional.pad(x, (0, pad))
        folded = length + pad
        x = x.view(batch, channels, folded // d, d).permute(0, 3, 1, 2)
        x = x.reshape(batch * d, channels, folded // d)
        y = self.conv(x)
        y = y.view(batch, d, -1, folded // d).permute(0, 2, 3, 1)
        y = y.reshape(batch, y.shape[1], folded)
        return y[..., :length] if pad else y


class GatedLayer(nn.Module):
    """Dilated conv -> gated tanh/sigmoid with conditioning -> residual + skip.

    The conditioning projection lives in the parent (one fused 1x1 conv for
    all layers, since every layer sees the same condition tensor); this
    module receives its slice pre-computed. The residual and skip 1x1
    projections are one fused conv split on the channel axis.
    """

    def __init__(self, residual: int, gate: int, skip: int, kernel: int, dilation: int):
        super().__init__()
        self.residual_channels = residual
        self.conv = DilatedConv1d(residual, gate, kernel, dilation)
        self.out = weight_norm(nn.Conv1d(gate // 2, residual + skip, 1))

    def forward(self, x: torch.Tensor, cond_gate: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.conv(x) + cond_gate
        a, b = h.chunk(2, dim=1)
        z = torch.tanh(a) * torch.sigmoid(b)
        out = self.out(z)
        return x + out[:, : self.residual_channels], out[:, self.residual_channels :]


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.condition_upsampler = ConditionUpsampler(
            cfg.condition_channels, cfg.upsample_channels, cfg.upsample_factors, cfg.lrelu_slope
        )
        self.noise_upsampler = ConditionUpsampler(
            cfg.noise_channels, cfg.upsample_channels, cfg.upsample_factors, cfg.lrelu_slope
        )
        self.input_conv = weight_norm(nn.Conv1d(cfg.upsample_channels, cfg.residual_channels, 1))
        cond_width = cfg.upsample_channels + (1 if cfg.use_pulse else 0)
        # one 1x1 conv computes every layer's conditioning contribution
        self.cond_proj = weight_norm(
            nn.Conv1d(cond_width, cfg.gate_channels * cfg.n_layers, 1)
        )
        self.layers = nn.ModuleList(
            GatedLayer(
                cfg.residual_channels,
                cfg.gate_channels,
                cfg.skip_channels,
                kernel,
                dilation,
            )
            for kernel, dilation in zip(cfg.layer_kernel_sizes, cfg.layer_dilations)
        )
        self.post1 = weight_norm(nn.Conv1d(cfg.skip_channels, cfg.skip_channels, 1))
        self.post2 = weight_norm(nn.Conv1d(cfg.skip_channels, 1, 1))

    def upsample_condition(self, condition: torch.Tensor) -> torch.Tensor:
        if condition.shape[1] != self.cfg.condition_channels:
            raise InvalidInput(
                f"condition has {condition.shape[1]} channels, expected {self.cfg.condition_channels}"
            )
        return self.condition_upsampler(condition)

    def upsample_noise(self, noise: torch.Tensor) -> torch.Tensor:
        if noise.shape[1] != self.cfg.noise_channels:
            raise InvalidInput(
                f"noise has {noise.shape[1]} channels, expected {self.cfg.noise_channels}"
            )
        return self.noise_upsampler(noise)

    def forward(
        self,
        noise: torch.Tensor,
        condition: torch.Tensor,
        pulse: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """noise/condition: (B, C, frames); pulse: (B, frames * hop). Returns (B, samples)."""
        if noise.shape[-1] != condition.shape[-1]:
            raise InvalidInput(
                f"noise spans {noise.shape[-1]} frames but condition {condition.shape[-1]}"
            )
        c = self.upsample_condition(condition)
        x = self.upsample_noise(noise)
        if self.cfg.use_pulse:
            if pulse is None:
                raise InvalidInput("this generator is configured to take a pulse sequence")
            if pulse.dim() == 1:
                pulse = pulse.unsqueeze(0)
            if pulse.shape[-1] != c.shape[-1]:
                raise InvalidInput(
                    f"pulse has {pulse.shape[-1]} samples, expected {c.shape[-1]}"
                )
            c = torch.cat([c, pulse.unsqueeze(1).to(c.dtype)], dim=1)
        x = self.input_conv(x)
        cond_gates = self.cond_proj(c).chunk(self.cfg.n_layers, dim=1)
        skips = None
        for layer, cond_gate in zip(self.layers, cond_gates):
            x, s = layer(x, cond_gate)
            skips = s if skips is None else skips + s
        h = torch.relu(skips)
        h = torch.relu(self.post1(h))
        return torch.tanh(self.post2(h)).squeeze(1)

    @torch.no_grad()
    def generate(
        self, noise: torch.Tensor, condition: torch.Tensor, pulse: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Inference entry point; same contract as :meth:`forward`."""
        was_training = self.training
        self.eval()
        try:
            return self.forward(noise, condition, pulse)
        finally:
            self.train(was_training)


def receptive_field(cfg: GeneratorConfig) -> int:
    """Samples of the gated body's receptive field: 1 + sum((k - 1) * d)."""
    return 1 + sum(
        (k - 1) * d for k, d in zip(cfg.layer_kernel_sizes, cfg.layer_dilations)
    )


def upsampler_margin(cfg: GeneratorConfig) -> int:
    """Half-width, in output samples, of the upsampling stack's spread.

    Each stage's kernel half-width f acts after the x f upsample, so
    earlier margins scale by later factors.
    """
    margin = 0
    for f in cfg.upsample_factors:
        margin = margin * f + f
    return margin


def total_influence_margin(cfg: GeneratorConfig) -> int:
    """Half-width of the span one condition frame can influence, in samples."""
    return upsampler_margin(cfg) + (receptive_field(cfg) - 1) // 2


def count_parameters(module: nn.Module) -> int:
    """Exact count of learnable scalars."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
