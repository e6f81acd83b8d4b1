"""Differentiable STFT / mel helpers (torch) used by losses and the
spectrogram discriminators.

Framing matches :mod:`pulsevox.features`: reflect pad by half a window so
frame t is centered at sample t * hop, multiply by a periodic Hann
window, zero-pad each frame to the FFT size at the tail. Keeping the two
paths on one convention lets the numpy features and the torch losses be
cross-checked directly.
"""

from __future__ import annotations

from functools import lru_cache

import torch

from .errors import InvalidInput
from .features import mel_filter_bank


@lru_cache(maxsize=32)
def _hann(window_length: int, dtype: torch.dtype) -> torch.Tensor:
    return torch.hann_window(window_length, periodic=True, dtype=dtype)


@lru_cache(maxsize=32)
def _mel_matrix(
    sample_rate: int, fft_size: int, n_mels: int, fmin: float, fmax: float, dtype: torch.dtype
) -> torch.Tensor:
    bank = mel_filter_bank(sample_rate, fft_size, n_mels, fmin, fmax)
    return torch.from_numpy(bank.T).to(dtype)  # (bins, n_mels)


def stft_complex(
    wave: torch.Tensor, fft_size: int, window_length: int, hop_length: int
) -> torch.Tensor:
    """Complex spectrogram (..., frames, fft_size // 2 + 1)."""
    if wave.shape[-1] < window_length // 2 + 1:
        raise InvalidInput(
            f"waveform of {wave.shape[-1]} samples is shorter than one "
            f"{window_length}-sample analysis window"
        )
    squeeze = wave.dim() == 1
    if squeeze:
        wave = wave.unsqueeze(0)
    pad = window_length // 2
    padded = torch.nn.functional.pad(wave.unsqueeze(1), (pad, pad), mode="reflect").squeeze(1)
    frames = padded.unfold(-1, window_length, hop_length)
    frames = frames * _hann(window_length, wave.dtype).to(wave.device)
    spec = torch.fft.rfft(frames, n=fft_size, dim=-1)
    return spec.squeeze(0) if squeeze else spec


def stft_magnitude(
    wave: torch.Tensor, fft_size: int, window_length: int, hop_length: int
) -> torch.Tensor:
    return stft_complex(wave, fft_size, window_length, hop_length).abs()


def stft_phase(
    wave: torch.Tensor, fft_size: int, window_length: int, hop_length: int
) -> torch.Tensor:
    """Phase in (-pi, pi]."""
    return torch.angle(stft_complex(wave, fft_size, window_length, hop_length))


def mel_magnitude(
    wave: torch.Tensor,
    sample_rate: int,
    fft_size: int,
    window_length: int,
    hop_length: int,
    n_mels: int,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> torch.Tensor:
    """Linear mel magnitudes (..., frames, n_mels)."""
    if fmax is None:
        fmax = sample_rate / 2
    mag = stft_magnitude(wave, fft_size, window_length, hop_length)
    mat = _mel_matrix(sample_rate, fft_size, n_mels, float(fmin), float(fmax), wave.dtype)
    return mag @ mat.to(wave.device)


def log_compress(mag: torch.Tensor, floor: float = 1e-5) -> torch.Tensor:
    return torch.log(torch.clamp(mag, min=floor))
