import dataclasses

import numpy as np
import pytest

from pulsevox.audio import AudioClip, save_wav
from pulsevox.config import Config, FeatureConfig, GeneratorConfig, MpdConfig, MrsdConfig, TrainConfig

SR = 48000


def micro_config(**train_overrides) -> Config:
    """Smallest config that satisfies every cross-invariant; for fast tests."""
    train = TrainConfig(
        segment_seconds=0.1,  # 4800 samples = 20 frames
        batch_size=2,
        max_iterations=4,
        checkpoint_interval=2,
        log_interval=1,
    )
    if train_overrides:
        train = dataclasses.replace(train, **train_overrides)
    return Config(
        features=FeatureConfig(n_mels=8, fmax=8000.0),
        generator=GeneratorConfig(
            stacks=1,
            kernel_sizes=(3, 3),
            dilations=(1, 2),
            residual_channels=4,
            gate_channels=8,
            skip_channels=4,
            condition_channels=9,
            noise_channels=9,
            upsample_channels=4,
        ),
        mpd=MpdConfig(channels=(2, 2, 2, 2, 2)),
        mrsd=MrsdConfig(channels=(2, 2, 2, 2, 2, 1)),
        train=train,
    )


def sawtooth(f0: float, seconds: float, sr: int = SR, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * sr))) / sr
    return amplitude * (2.0 * ((f0 * t) % 1.0) - 1.0)


def vibrato_sawtooth(
    f0: float, seconds: float, sr: int = SR, depth: float = 6.0, rate: float = 5.0
) -> np.ndarray:
    """Sawtooth with slow pitch vibrato, a crude singing stand-in."""
    n = int(round(seconds * sr))
    t = np.arange(n) / sr
    inst = f0 + depth * np.sin(2.0 * np.pi * rate * t)
    phase = np.cumsum(inst) / sr
    return 0.5 * (2.0 * (phase % 1.0) - 1.0)


def singing_clip(seconds: float = 1.0, sr: int = SR, seed: int = 0) -> AudioClip:
    """Voiced vibrato segment, a breathy noise segment, and leading silence."""
    rng = np.random.default_rng(seed)
    third = seconds / 3.0
    silence = np.zeros(int(round(third * sr)))
    voiced = vibrato_sawtooth(220.0, third, sr)
    noise = rng.normal(0.0, 0.05, int(round(third * sr)))
    return AudioClip(np.concatenate([silence, voiced, noise]), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(2026)


@pytest.fixture
def wav_file(tmp_path):
    """Write a synthetic 0.5 s singing clip to disk and return its path."""
    clip = singing_clip(seconds=0.5, seed=11)
    path = tmp_path / "clip.wav"
    save_wav(path, clip)
    return path
