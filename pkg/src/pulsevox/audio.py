"""Waveform container and strict 48 kHz WAV I/O.

Only mono 16-bit PCM and 32-bit float WAV files at the configured sample
rate are accepted; anything else is rejected rather than silently
resampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InvalidInput


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform in [-1, 1] plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise InvalidInput("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("samples contain non-finite values")
        if self.sample_rate <= 0:
            raise InvalidInput("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path: str | Path, expected_rate: int = 48000) -> AudioClip:
    """Read a mono WAV file, validating rate and sample format."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise InvalidInput(f"cannot read WAV file {path}: {exc}") from exc
    if rate != expected_rate:
        raise InvalidInput(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (no resampling is performed)"
        )
    if data.ndim != 1:
        raise InvalidInput(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidInput(
            f"{path}: unsupported sample format {data.dtype}, expected int16 or float32"
        )
    return AudioClip(samples=samples, sample_rate=rate)


def save_wav(path: str | Path, clip: AudioClip) -> None:
    """Write 16-bit PCM without dithering (bit-reproducible output)."""
    clipped = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    wavfile.write(Path(path), clip.sample_rate, pcm)
