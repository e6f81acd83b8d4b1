"""Inference: rebuild a generator from a checkpoint and vocode features.

Synthesis with a fixed seed is bit-reproducible: the input noise comes
from a dedicated torch.Generator and the pulse noise from the numpy seed,
so nothing depends on ambient RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .audio import AudioClip
from .cache import FeatureBundle, extract_bundle
from .config import Config, config_from_dict
from .errors import InvalidInput
from .features import FeatureStats
from .generator import Generator
from .pulse import extract_pulse
from .training import load_checkpoint


@dataclass
class Synthesizer:
    generator: Generator
    stats: FeatureStats
    config: Config

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "Synthesizer":
        payload = load_checkpoint(path)
        cfg = config_from_dict(payload["config"])
        generator = Generator(cfg.generator)
        generator.load_state_dict(payload["generator"])
        generator.eval()
        stats = FeatureStats(mean=payload["stats_mean"], std=payload["stats_std"])
        return cls(generator=generator, stats=stats, config=cfg)

    def synthesize(self, bundle: FeatureBundle, seed: int = 0) -> AudioClip:
        """Vocode a feature bundle into frames * hop samples of audio."""
        cfg = self.config
        if bundle.mel.shape[1] != cfg.features.n_mels:
            raise InvalidInput(
                f"bundle has {bundle.mel.shape[1]} mel channels, "
                f"checkpoint expects {cfg.features.n_mels}"
            )
        if bundle.hop_length != cfg.features.stft.hop_length:
            raise InvalidInput(
                f"bundle hop {bundle.hop_length} != checkpoint hop {cfg.features.stft.hop_length}"
            )
        norm_mel = self.stats.normalize(bundle.mel)
        cond = np.concatenate([norm_mel, bundle.logf0[:, None]], axis=1)
        pulse = extract_pulse(
            norm_mel,
            bundle.f0,
            bundle.vuv,
            sample_rate=cfg.features.sample_rate,
            hop_length=bundle.hop_length,
            noise_std=cfg.train.noise_std,
            seed=seed,
        )
        gen_rng = torch.Generator().manual_seed(seed)
        noise = torch.randn(
            1, cfg.generator.noise_channels, bundle.n_frames, generator=gen_rng
        )
        cond_t = torch.from_numpy(cond.T).float().unsqueeze(0)
        pulse_t = torch.from_numpy(pulse.values).float().unsqueeze(0)
        wave = self.generator.generate(
            noise, cond_t, pulse_t if cfg.generator.use_pulse else None
        )
        return AudioClip(
            samples=wave.squeeze(0).double().numpy(), sample_rate=cfg.features.sample_rate
        )

    def copy_synthesize(self, clip: AudioClip, seed: int = 0) -> tuple[AudioClip, FeatureBundle]:
        """Round-trip a waveform through feature extraction and back."""
        bundle = extract_bundle(clip, self.config.features)
        return self.synthesize(bundle, seed=seed), bundle
