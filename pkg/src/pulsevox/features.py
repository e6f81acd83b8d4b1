"""Deterministic DSP front end: STFT, full-band log-mel, corpus statistics.

All operations are pure functions of their inputs (bit-identical outputs
for identical inputs and configs), which the on-disk feature cache relies
on.

Framing convention: with ``center=True`` the signal is reflect-padded by
``window_length // 2`` on both sides, so frame ``t`` is centered at sample
``t * hop_length`` and the frame count is ``len(x) // hop + 1`` for even
window lengths. With ``center=False`` frames tile the raw signal and the
count is ``(len(x) - window) // hop + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio import AudioClip
from .config import StftConfig
from .errors import ConfigError, InvalidInput


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window (matches the torch convention)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def make_window(kind: str, length: int) -> np.ndarray:
    if kind == "hann":
        return hann_window(length)
    if kind == "rectangular":
        return np.ones(length)
    raise ConfigError(f"unknown window type {kind!r}")


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    """Number of analysis frames the STFT will produce for a signal."""
    length = n_samples + 2 * (cfg.window_length // 2) if cfg.center else n_samples
    if length < cfg.window_length:
        raise InvalidInput(
            f"signal of {n_samples} samples is shorter than one {cfg.window_length}-sample window"
        )
    return (length - cfg.window_length) // cfg.hop_length + 1


def _frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    if cfg.center:
        pad = cfg.window_length // 2
        if pad > 0 and x.size < pad + 1:
            raise InvalidInput(
                f"signal of {x.size} samples is too short to reflect-pad by {pad}"
            )
        x = np.pad(x, pad, mode="reflect")
    if x.size < cfg.window_length:
        raise InvalidInput(
            f"signal of {x.size} samples is shorter than one {cfg.window_length}-sample window"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_length)
    return frames[:: cfg.hop_length]


def stft(clip: AudioClip, cfg: StftConfig) -> np.ndarray:
    """Complex spectrogram of shape (frames, fft_size // 2 + 1)."""
    frames = _frame_signal(clip.samples, cfg)
    window = make_window(cfg.window, cfg.window_length)
    return np.fft.rfft(frames * window, n=cfg.fft_size, axis=1)


def hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_bank(
    sample_rate: int, fft_size: int, n_mels: int, fmin: float, fmax: float
) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size // 2 + 1).

    Raises ConfigError when the FFT grid is too coarse to give every
    filter at least one nonzero weight.
    """
    if not (0 <= fmin < fmax <= sample_rate / 2):
        raise ConfigError(f"need 0 <= fmin < fmax <= sample_rate/2, got [{fmin}, {fmax}]")
    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * (sample_rate / fft_size)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_freqs - left) / np.maximum(center - left, 1e-12)
    down = (right - bin_freqs) / np.maximum(right - center, 1e-12)
    weights = np.maximum(0.0, np.minimum(up, down))
    if np.any(weights.sum(axis=1) <= 0):
        raise ConfigError(
            f"{n_mels} mel filters cannot all be populated from {n_bins} FFT bins"
        )
    return weights


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-magnitude mel spectrogram (natural log, floored)."""

    values: np.ndarray  # (frames, n_mels)
    sample_rate: int
    stft: StftConfig
    n_mels: int
    fmin: float
    fmax: float
    log_floor: float

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def mel_spectrogram(
    clip: AudioClip,
    cfg: StftConfig,
    n_mels: int = 120,
    fmin: float = 0.0,
    fmax: float | None = None,
    log_floor: float = 1e-5,
) -> MelSpectrogram:
    """log(max(filterbank @ |STFT|, log_floor))."""
    if fmax is None:
        fmax = clip.sample_rate / 2
    weights = mel_filter_bank(clip.sample_rate, cfg.fft_size, n_mels, fmin, fmax)
    magnitude = np.abs(stft(clip, cfg))
    mel = magnitude @ weights.T
    values = np.log(np.maximum(mel, log_floor))
    return MelSpectrogram(
        values=values,
        sample_rate=clip.sample_rate,
        stft=cfg,
        n_mels=n_mels,
        fmin=fmin,
        fmax=fmax,
        log_floor=log_floor,
    )


@dataclass(frozen=True)
class FeatureStats:
    """Per-channel mean/std of log-mel values over a training corpus."""

    mean: np.ndarray  # (n_mels,)
    std: np.ndarray  # (n_mels,)

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise InvalidInput("mean and std must be matching 1-D arrays")
        if np.any(self.std <= 0):
            raise InvalidInput("std must be positive for every channel")

    def normalize(self, mel: np.ndarray) -> np.ndarray:
        return (mel - self.mean) / self.std

    def denormalize(self, mel: np.ndarray) -> np.ndarray:
        return mel * self.std + self.mean


def compute_stats(corpus: Sequence[MelSpectrogram | np.ndarray], std_floor: float = 1e-8) -> FeatureStats:
    """Exact two-pass per-channel statistics over all frames of a corpus."""
    if len(corpus) == 0:
        raise InvalidInput("cannot compute statistics of an empty corpus")
    arrays = [m.values if isinstance(m, MelSpectrogram) else np.asarray(m, dtype=np.float64) for m in corpus]
    channels = arrays[0].shape[1]
    if any(a.ndim != 2 or a.shape[1] != channels for a in arrays):
        raise InvalidInput("all corpus entries must share the same channel count")
    stacked = np.concatenate(arrays, axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), std_floor)
    return FeatureStats(mean=mean, std=std)
