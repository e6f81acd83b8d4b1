"""Training objectives: least-squares adversarial terms, multi-resolution
spectrogram + phase reconstruction, and feature matching.

Spectral convergence here normalizes by the *fake* magnitude by default
(``x`` is the generated feature, ``y`` the real one); pass
``denominator="real"`` for the more common normalization. Phase
differences are wrapped to (-pi, pi] before the norm so a full-turn
offset costs nothing.
"""

from __future__ import annotations

import math

import torch

from .config import AuxLossConfig, LossWeights
from .discriminators import DiscriminatorOutput
from .errors import InvalidInput
from .spectral import mel_magnitude, stft_complex

_EPS = 1e-12


def spectral_convergence(
    x: torch.Tensor, y: torch.Tensor, denominator: str = "fake"
) -> torch.Tensor:
    """||x - y||_F / ||x||_F (or / ||y||_F with denominator="real")."""
    if x.shape != y.shape:
        raise InvalidInput(f"shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    ref = x if denominator == "fake" else y
    return torch.linalg.vector_norm(x - y) / torch.clamp(torch.linalg.vector_norm(ref), min=_EPS)


def log_magnitude_loss(x: torch.Tensor, y: torch.Tensor, floor: float = 1e-5) -> torch.Tensor:
    """Mean absolute difference of floored log magnitudes."""
    if x.shape != y.shape:
        raise InvalidInput(f"shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    return torch.mean(torch.abs(torch.log(torch.clamp(x, min=floor)) - torch.log(torch.clamp(y, min=floor))))


def wrap_phase(delta: torch.Tensor) -> torch.Tensor:
    """Map phase differences into (-pi, pi]."""
    return delta - 2.0 * math.pi * torch.ceil((delta - math.pi) / (2.0 * math.pi))


def phase_convergence(x_phase: torch.Tensor, y_phase: torch.Tensor) -> torch.Tensor:
    """Frobenius form of spectral convergence applied to wrapped phase error."""
    if x_phase.shape != y_phase.shape:
        raise InvalidInput(f"shape mismatch {tuple(x_phase.shape)} vs {tuple(y_phase.shape)}")
    wrapped = wrap_phase(x_phase - y_phase)
    return torch.linalg.vector_norm(wrapped) / torch.clamp(
        torch.linalg.vector_norm(x_phase), min=_EPS
    )


def aux_spectrogram_phase_loss(
    fake: torch.Tensor,
    real: torch.Tensor,
    cfg: AuxLossConfig,
    sample_rate: int,
) -> torch.Tensor:
    """Mean over STFT resolutions of (SC + log-mag + phase convergence)
    plus mean over mel resolutions of (SC + log-mag)."""
    if fake.shape != real.shape:
        raise InvalidInput(f"waveform shape mismatch {tuple(fake.shape)} vs {tuple(real.shape)}")
    sp = fake.new_zeros(())
    for fft, win, hop in cfg.stft_resolutions:
        fake_spec = stft_complex(fake, fft, win, hop)
        real_spec = stft_complex(real, fft, win, hop)
        fake_mag, real_mag = fake_spec.abs(), real_spec.abs()
        sp = sp + spectral_convergence(fake_mag, real_mag, cfg.sc_denominator)
        sp = sp + log_magnitude_loss(fake_mag, real_mag, cfg.log_floor)
        if cfg.phase_weight > 0:
            sp = sp + cfg.phase_weight * phase_convergence(
                torch.angle(fake_spec), torch.angle(real_spec)
            )
    sp = sp / len(cfg.stft_resolutions)

    mel = fake.new_zeros(())
    for fft, win, hop, n_mels in cfg.mel_resolutions:
        fake_mel = mel_magnitude(fake, sample_rate, fft, win, hop, n_mels)
        real_mel = mel_magnitude(real, sample_rate, fft, win, hop, n_mels)
        mel = mel + spectral_convergence(fake_mel, real_mel, cfg.sc_denominator)
        mel = mel + log_magnitude_loss(fake_mel, real_mel, cfg.log_floor)
    mel = mel / len(cfg.mel_resolutions)

    return sp + mel


def adversarial_g_loss(fake_scores: list[torch.Tensor]) -> torch.Tensor:
    """Mean over sub-discriminators of mean((1 - D(G(z)))^2)."""
    if not fake_scores:
        raise InvalidInput("need at least one score map")
    terms = [torch.mean((1.0 - s) ** 2) for s in fake_scores]
    return torch.stack(terms).mean()


def adversarial_d_loss(
    real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]
) -> torch.Tensor:
    """Mean of (1 - D(y))^2 plus mean of D(G(z))^2."""
    if not real_scores or not fake_scores:
        raise InvalidInput("need at least one score map on each side")
    real = torch.stack([torch.mean((1.0 - s) ** 2) for s in real_scores]).mean()
    fake = torch.stack([torch.mean(s**2) for s in fake_scores]).mean()
    return real + fake


def feature_match_loss(
    real_out: DiscriminatorOutput, fake_out: DiscriminatorOutput
) -> torch.Tensor:
    """Sum over all sub-discriminator layers of mean |real - fake| feature error."""
    if len(real_out.features) != len(fake_out.features):
        raise InvalidInput("real and fake outputs have different sub-discriminator counts")
    total = None
    for real_list, fake_list in zip(real_out.features, fake_out.features):
        if len(real_list) != len(fake_list):
            raise InvalidInput("real and fake feature lists are misaligned")
        for r, f in zip(real_list, fake_list):
            if r.shape != f.shape:
                raise InvalidInput(f"feature shape mismatch {tuple(r.shape)} vs {tuple(f.shape)}")
            term = torch.mean(torch.abs(r - f))
            total = term if total is None else total + term
    if total is None:
        raise InvalidInput("no feature maps to match")
    return total


def generator_total_loss(
    adversarial: torch.Tensor,
    auxiliary: torch.Tensor,
    feature_match: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    return (
        weights.adversarial * adversarial
        + weights.auxiliary * auxiliary
        + weights.feature_match * feature_match
    )


def discriminator_total_loss(
    real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]
) -> torch.Tensor:
    return adversarial_d_loss(real_scores, fake_scores)
