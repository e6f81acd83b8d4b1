"""Objective evaluation: multi-resolution spectral error, mel-cepstral
distortion, real-time factor, and parameter counting.

MCD uses the first 25 mel-cepstral coefficients (energy coefficient
excluded) with the conventional 10 * sqrt(2) / ln(10) scaling, computed
from the same full-band log-mel front end used for training features.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy.fft import dct

from .audio import AudioClip
from .config import AuxLossConfig, FeatureConfig
from .errors import InvalidInput
from .features import mel_spectrogram
from .losses import log_magnitude_loss, spectral_convergence
from .spectral import stft_magnitude

MCD_SCALE = 10.0 * np.sqrt(2.0) / np.log(10.0)
MCD_COEFFS = 25


def multi_resolution_stft_error(
    fake: np.ndarray, real: np.ndarray, cfg: AuxLossConfig | None = None
) -> float:
    """Mean over STFT resolutions of spectral convergence + log-magnitude
    error (real-normalized convergence: this is a metric, not the loss)."""
    if cfg is None:
        cfg = AuxLossConfig()
    if fake.shape != real.shape:
        raise InvalidInput(f"waveform shape mismatch {fake.shape} vs {real.shape}")
    f = torch.from_numpy(np.asarray(fake, dtype=np.float64))
    r = torch.from_numpy(np.asarray(real, dtype=np.float64))
    total = 0.0
    with torch.no_grad():
        for fft, win, hop in cfg.stft_resolutions:
            fm = stft_magnitude(f, fft, win, hop)
            rm = stft_magnitude(r, fft, win, hop)
            total += float(spectral_convergence(fm, rm, denominator="real"))
            total += float(log_magnitude_loss(fm, rm, cfg.log_floor))
    return total / len(cfg.stft_resolutions)


def mel_cepstrum(log_mel: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II of log-mel frames along the channel axis."""
    return dct(log_mel, type=2, norm="ortho", axis=1)


def mel_cepstral_distortion(
    fake: AudioClip, real: AudioClip, cfg: FeatureConfig | None = None
) -> float:
    """MCD in dB over the overlapping frames of two clips."""
    if cfg is None:
        cfg = FeatureConfig()
    mels = []
    for clip in (fake, real):
        mel = mel_spectrogram(
            clip, cfg.stft, n_mels=cfg.n_mels, fmin=cfg.fmin, fmax=cfg.fmax, log_floor=cfg.log_floor
        )
        mels.append(mel_cepstrum(mel.values))
    n = min(m.shape[0] for m in mels)
    if n == 0:
        raise InvalidInput("clips too short for any analysis frame")
    a, b = mels[0][:n, 1 : MCD_COEFFS + 1], mels[1][:n, 1 : MCD_COEFFS + 1]
    frame_dist = np.sqrt(np.sum((a - b) ** 2, axis=1))
    return float(MCD_SCALE * frame_dist.mean())


@dataclass
class UtteranceResult:
    utterance: str
    stft_error: float
    mcd_db: float
    synth_seconds: float
    audio_seconds: float

    @property
    def rtf(self) -> float:
        return self.synth_seconds / self.audio_seconds


@dataclass
class EvalReport:
    results: list[UtteranceResult]
    skipped: list[str]
    parameter_count: int

    @property
    def mean_stft_error(self) -> float:
        return float(np.mean([r.stft_error for r in self.results])) if self.results else float("nan")

    @property
    def mean_mcd_db(self) -> float:
        return float(np.mean([r.mcd_db for r in self.results])) if self.results else float("nan")

    @property
    def rtf(self) -> float:
        """Corpus RTF: total synthesis time over total audio time."""
        synth = sum(r.synth_seconds for r in self.results)
        audio = sum(r.audio_seconds for r in self.results)
        return synth / audio if audio else float("nan")

    def to_dict(self) -> dict:
        return {
            "parameter_count": self.parameter_count,
            "mean_stft_error": self.mean_stft_error,
            "mean_mcd_db": self.mean_mcd_db,
            "rtf": self.rtf,
            "skipped": list(self.skipped),
            "utterances": [
                {**dataclasses.asdict(r), "rtf": r.rtf}
                for r in sorted(self.results, key=lambda r: r.utterance)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate_utterance(synthesizer, clip: AudioClip, name: str, seed: int = 0) -> UtteranceResult:
    """Copy-synthesize one utterance and score it against the original."""
    t0 = time.perf_counter()
    fake, _ = synthesizer.copy_synthesize(clip, seed=seed)
    synth_seconds = time.perf_counter() - t0
    n = min(len(fake), len(clip))
    fake_arr, real_arr = fake.samples[:n], clip.samples[:n]
    return UtteranceResult(
        utterance=name,
        stft_error=multi_resolution_stft_error(fake_arr, real_arr),
        mcd_db=mel_cepstral_distortion(fake, clip, synthesizer.config.features),
        synth_seconds=synth_seconds,
        audio_seconds=clip.duration,
    )


def evaluate_corpus(synthesizer, manifest: list[Path], seed: int = 0) -> EvalReport:
    from .audio import load_wav
    from .generator import count_parameters

    results, skipped = [], []
    for path in manifest:
        try:
            clip = load_wav(path, expected_rate=synthesizer.config.features.sample_rate)
        except InvalidInput as exc:
            skipped.append(f"{path}: {exc}")
            continue
        results.append(evaluate_utterance(synthesizer, clip, name=Path(path).stem, seed=seed))
    return EvalReport(
        results=results,
        skipped=skipped,
        parameter_count=count_parameters(synthesizer.generator),
    )
