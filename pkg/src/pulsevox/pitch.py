"""Autocorrelation (YIN-style) fundamental frequency and voicing decisions.

Per frame, the cumulative-mean-normalized difference function (CMNDF) is
evaluated over the lag range of the configured pitch interval. A frame is
voiced when the CMNDF dips below the periodicity threshold; the first
qualifying dip is refined to its local minimum and interpolated
parabolically. Frames are centered at ``t * hop`` so the track aligns
one-to-one with mel frames extracted at the same hop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .audio import AudioClip
from .errors import InvalidInput

_SILENCE_RMS = 1e-8


@dataclass(frozen=True)
class PitchTrack:
    f0: np.ndarray  # Hz, 0 where unvoiced
    vuv: np.ndarray  # uint8, 1 = voiced
    frame_rate: float

    def __post_init__(self) -> None:
        if self.f0.shape != self.vuv.shape or self.f0.ndim != 1:
            raise InvalidInput("f0 and vuv must be matching 1-D arrays")
        if not np.array_equal(self.f0 > 0, self.vuv == 1):
            raise InvalidInput("f0 > 0 must hold exactly on voiced frames")

    @property
    def n_frames(self) -> int:
        return self.f0.size


def extract_f0(
    clip: AudioClip,
    frame_rate: float = 200.0,
    f0_min: float = 60.0,
    f0_max: float = 1500.0,
    threshold: float = 0.45,
) -> PitchTrack:
    """Per-frame pitch in [f0_min, f0_max] with V/UV decisions.

    The frame count equals ``len(clip) // hop + 1``, matching the
    center-padded STFT convention of :mod:`pulsevox.features`.
    """
    sr = clip.sample_rate
    if f0_min < 20.0:
        raise InvalidInput(f"f0_min must be >= 20 Hz, got {f0_min}")
    if f0_max > sr / 4:
        raise InvalidInput(f"f0_max must be <= sample_rate/4, got {f0_max}")
    if f0_min >= f0_max:
        raise InvalidInput("f0_min must be below f0_max")
    hop = int(round(sr / frame_rate))
    if hop < 1 or abs(sr / frame_rate - hop) > 1e-6:
        raise InvalidInput(f"frame_rate {frame_rate} does not divide sample rate {sr}")

    tau_max = int(np.ceil(sr / f0_min))
    tau_min = max(2, int(np.floor(sr / f0_max)))
    width = max(int(round(0.025 * sr)), 2 * tau_min)  # integration window
    slice_len = width + tau_max

    x = clip.samples
    n_frames = x.size // hop + 1
    pad = slice_len // 2
    padded = _safe_reflect_pad(x, pad)
    starts = np.arange(n_frames) * hop
    frames = np.stack([padded[s : s + slice_len] for s in starts])

    cmndf = _cmndf(frames, width, tau_max)
    f0 = np.zeros(n_frames)
    vuv = np.zeros(n_frames, dtype=np.uint8)
    rms = np.sqrt(np.mean(frames**2, axis=1))

    for t in range(n_frames):
        if rms[t] < _SILENCE_RMS:
            continue
        tau = _pick_lag(cmndf[t], tau_min, tau_max, threshold)
        if tau is None:
            continue
        refined = _parabolic_min(cmndf[t], tau)
        hz = sr / refined
        f0[t] = min(max(hz, f0_min), f0_max)
        vuv[t] = 1

    return PitchTrack(f0=f0, vuv=vuv, frame_rate=frame_rate)


def _safe_reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    if x.size > pad:
        return np.pad(x, pad, mode="reflect")
    # Very short clips: reflect as far as possible, then zero-fill.
    inner = x.size - 1
    if inner > 0:
        x = np.pad(x, inner, mode="reflect")
    rest = pad - inner
    return np.pad(x, rest, mode="constant")


def _cmndf(frames: np.ndarray, width: int, tau_max: int) -> np.ndarray:
    """Cumulative-mean-normalized difference function, shape (frames, tau_max + 1)."""
    n = frames.shape[1]
    fft_len = next_fast_len(n)
    spec = np.fft.rfft(frames, n=fft_len, axis=1)
    head = np.zeros_like(frames)
    head[:, :width] = frames[:, :width]
    head_spec = np.fft.rfft(head, n=fft_len, axis=1)
    corr = np.fft.irfft(np.conj(head_spec) * spec, n=fft_len, axis=1)[:, : tau_max + 1]

    sq = frames**2
    csum = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(sq, axis=1)], axis=1)
    energy = csum[:, width : width + tau_max + 1] - csum[:, 0 : tau_max + 1]  # E[tau..tau+W)
    diff = energy[:, :1] + energy - 2.0 * corr
    diff = np.maximum(diff, 0.0)  # guard tiny negative round-off

    taus = np.arange(1, tau_max + 1)
    running = np.cumsum(diff[:, 1:], axis=1)
    out = np.ones_like(diff)
    np.divide(diff[:, 1:] * taus, running, out=out[:, 1:], where=running > 0)
    out[:, 1:][running <= 0] = 1.0
    return out


def _pick_lag(cmndf: np.ndarray, tau_min: int, tau_max: int, threshold: float) -> int | None:
    below = np.nonzero(cmndf[tau_min : tau_max + 1] < threshold)[0]
    if below.size == 0:
        return None
    tau = tau_min + int(below[0])
    while tau + 1 <= tau_max and cmndf[tau + 1] < cmndf[tau]:
        tau += 1
    return tau


def _parabolic_min(values: np.ndarray, tau: int) -> float:
    if tau <= 0 or tau >= values.size - 1:
        return float(tau)
    a, b, c = values[tau - 1], values[tau], values[tau + 1]
    denom = a - 2.0 * b + c
    if denom <= 0:
        return float(tau)
    offset = 0.5 * (a - c) / denom
    return tau + float(np.clip(offset, -0.5, 0.5))
