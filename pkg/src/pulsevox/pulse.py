"""Excitation pulse sequence conditioning the generator.

Voiced regions carry one pulse per pitch period (spacing ``sample_rate /
f0`` samples), each with amplitude equal to the Euclidean norm of the
log-mel frame covering that sample; all other voiced samples are zero.
Unvoiced regions are i.i.d. Gaussian noise. Pulse placement uses phase
accumulation so a time-varying f0 is handled: the phase starts at 0 at
the first sample of each maximal voiced run (which emits a pulse) and a
new pulse fires whenever the accumulated phase crosses an integer.

``pulse_oracle`` is a deliberately plain per-sample reimplementation used
by the test suite; both functions must agree elementwise, including the
exact noise draws, so they consume the seeded generator identically (one
normal variate per unvoiced sample, in index order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True)
class PulseSequence:
    values: np.ndarray  # (frames * hop_length,)
    hop_length: int
    rng_seed: int

    @property
    def length(self) -> int:
        return self.values.size


def _validate(mel: np.ndarray, f0: np.ndarray, vuv: np.ndarray, noise_std: float) -> None:
    if mel.ndim != 2:
        raise InvalidInput("mel must be a 2-D (frames, channels) array")
    if f0.shape != vuv.shape or f0.ndim != 1:
        raise InvalidInput("f0 and vuv must be matching 1-D arrays")
    if mel.shape[0] != f0.size:
        raise InvalidInput(
            f"mel has {mel.shape[0]} frames but pitch track has {f0.size}"
        )
    if noise_std <= 0:
        raise InvalidInput("noise_std must be positive")
    if np.any((vuv == 1) & (f0 <= 0)):
        raise InvalidInput("voiced frames must carry f0 > 0")


def extract_pulse(
    mel: np.ndarray,
    f0: np.ndarray,
    vuv: np.ndarray,
    *,
    sample_rate: int,
    hop_length: int,
    noise_std: float = 0.003,
    seed: int = 0,
) -> PulseSequence:
    """Sample-rate excitation from frame-rate mel / f0 / vuv.

    ``mel`` should hold the (normalized) log-mel values actually fed to
    the generator so pulse amplitudes live on the conditioning scale.
    """
    mel = np.asarray(mel, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    vuv = np.asarray(vuv)
    _validate(mel, f0, vuv, noise_std)

    n_frames = f0.size
    length = n_frames * hop_length
    out = np.zeros(length)

    voiced = np.repeat(vuv == 1, hop_length)
    amp = np.sqrt(np.sum(mel * mel, axis=1))
    amp_samples = np.repeat(amp, hop_length)
    f0_samples = np.repeat(f0, hop_length)

    rng = np.random.default_rng(seed)
    n_unvoiced = int(np.count_nonzero(~voiced))
    if n_unvoiced:
        out[~voiced] = rng.normal(0.0, noise_std, size=n_unvoiced)

    # Maximal voiced runs: [start, stop) index pairs. Phase accumulates in
    # Hz units (sum of per-sample f0) and is divided by the sample rate
    # only inside the floor, so integer-valued f0 gives exact pulse grids.
    edges = np.flatnonzero(np.diff(voiced.astype(np.int8)))
    bounds = np.concatenate([[0], edges + 1, [length]])
    for start, stop in zip(bounds[:-1], bounds[1:]):
        if stop <= start or not voiced[start]:
            continue
        inc = f0_samples[start:stop].copy()
        inc[0] = 0.0  # phase starts at zero on the run's first sample
        cycles = np.floor(np.cumsum(inc) / sample_rate)
        fire = np.empty(stop - start, dtype=bool)
        fire[0] = True
        fire[1:] = cycles[1:] > cycles[:-1]
        idx = start + np.flatnonzero(fire)
        out[idx] = amp_samples[idx]

    return PulseSequence(values=out, hop_length=hop_length, rng_seed=seed)


def pulse_oracle(
    mel: np.ndarray,
    f0: np.ndarray,
    vuv: np.ndarray,
    *,
    sample_rate: int,
    hop_length: int,
    noise_std: float = 0.003,
    seed: int = 0,
) -> PulseSequence:
    """Per-sample loop reference for :func:`extract_pulse` (tests only)."""
    mel = np.asarray(mel, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    vuv = np.asarray(vuv)
    _validate(mel, f0, vuv, noise_std)

    rng = np.random.default_rng(seed)
    length = f0.size * hop_length
    out = np.zeros(length)
    phase_hz = 0.0
    in_run = False
    for i in range(length):
        frame = i // hop_length
        if vuv[frame] != 1:
            out[i] = rng.normal(0.0, noise_std)
            in_run = False
            continue
        row = mel[frame]
        amplitude = np.sqrt(np.sum(row * row))
        if not in_run:
            phase_hz = 0.0
            in_run = True
            out[i] = amplitude
            continue
        prev = phase_hz
        phase_hz = phase_hz + f0[frame]
        if np.floor(phase_hz / sample_rate) > np.floor(prev / sample_rate):
            out[i] = amplitude
    return PulseSequence(values=out, hop_length=hop_length, rng_seed=seed)
