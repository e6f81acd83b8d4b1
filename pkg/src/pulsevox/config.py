"""Dataclass configuration for every tunable in the vocoder.

A single :class:`Config` object is the source of truth for feature
extraction, model architecture, losses, and the training recipe. It
serializes to YAML and travels inside every checkpoint together with a
content hash so stale artifacts are detected on load.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

WINDOW_TYPES = ("hann", "rectangular")


@dataclass(frozen=True)
class StftConfig:
    """Analysis window geometry. Reference: 20 ms window / 5 ms hop at 48 kHz."""

    fft_size: int = 2048
    window_length: int = 960
    hop_length: int = 240
    window: str = "hann"
    center: bool = True

    def __post_init__(self) -> None:
        if self.window not in WINDOW_TYPES:
            raise ConfigError(f"unknown window type {self.window!r}")
        if not (0 < self.window_length <= self.fft_size):
            raise ConfigError(
                f"need 0 < window_length <= fft_size, got {self.window_length}/{self.fft_size}"
            )
        if not (0 < self.hop_length <= self.window_length):
            raise ConfigError(
                f"need 0 < hop_length <= window_length, got {self.hop_length}/{self.window_length}"
            )


@dataclass(frozen=True)
class FeatureConfig:
    """Front-end settings: full-band log-mel, pitch range, voicing threshold."""

    sample_rate: int = 48000
    stft: StftConfig = field(default_factory=StftConfig)
    n_mels: int = 120
    fmin: float = 0.0
    fmax: float = 24000.0
    log_floor: float = 1e-5
    f0_min: float = 60.0
    f0_max: float = 1500.0
    voicing_threshold: float = 0.45

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise ConfigError(
                f"need 0 <= fmin < fmax <= sample_rate/2, got [{self.fmin}, {self.fmax}]"
            )
        if not (20.0 <= self.f0_min < self.f0_max <= self.sample_rate / 4):
            raise ConfigError(
                f"need 20 <= f0_min < f0_max <= sample_rate/4, got [{self.f0_min}, {self.f0_max}]"
            )
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.stft.hop_length


@dataclass(frozen=True)
class GeneratorConfig:
    """Dilated gated CNN generator with frame-to-sample upsampling.

    18 layers = 3 stacks of 6; per-stack kernel sizes grow to widen the
    receptive field. ``use_pulse=False`` drops the excitation channel
    (ablation switch).
    """

    stacks: int = 3
    kernel_sizes: tuple[int, ...] = (3, 3, 9, 9, 17, 17)
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    residual_channels: int = 16
    gate_channels: int = 32
    skip_channels: int = 16
    condition_channels: int = 121  # 120 mel + 1 logF0
    noise_channels: int = 121
    upsample_factors: tuple[int, ...] = (8, 6, 5)
    upsample_channels: int = 32
    use_pulse: bool = True
    lrelu_slope: float = 0.2

    def __post_init__(self) -> None:
        if len(self.kernel_sizes) != len(self.dilations):
            raise ConfigError("kernel_sizes and dilations must have equal length")
        if any(k % 2 == 0 or k < 1 for k in self.kernel_sizes):
            raise ConfigError(f"kernel sizes must be odd and positive, got {self.kernel_sizes}")
        if any(d < 1 for d in self.dilations):
            raise ConfigError(f"dilations must be >= 1, got {self.dilations}")
        if self.gate_channels % 2 != 0:
            raise ConfigError("gate_channels must be even (split into tanh/sigmoid halves)")
        if self.stacks < 1 or min(
            self.residual_channels, self.skip_channels, self.upsample_channels
        ) < 1:
            raise ConfigError("stacks and channel widths must be >= 1")

    @property
    def n_layers(self) -> int:
        return self.stacks * len(self.kernel_sizes)

    @property
    def layer_kernel_sizes(self) -> tuple[int, ...]:
        return self.kernel_sizes * self.stacks

    @property
    def layer_dilations(self) -> tuple[int, ...]:
        return self.dilations * self.stacks

    @property
    def total_upsample(self) -> int:
        return math.prod(self.upsample_factors)


@dataclass(frozen=True)
class MpdConfig:
    """Period-folding waveform discriminator bank."""

    periods: tuple[int, ...] = (2, 3, 5, 7, 11)
    channels: tuple[int, ...] = (32, 128, 512, 1024, 1024)
    kernel_size: int = 5
    stride: int = 3
    lrelu_slope: float = 0.1

    def __post_init__(self) -> None:
        if any(p < 2 for p in self.periods):
            raise ConfigError(f"periods must all be >= 2, got {self.periods}")
        for i, p in enumerate(self.periods):
            for q in self.periods[i + 1 :]:
                if math.gcd(p, q) != 1:
                    raise ConfigError(f"periods must be pairwise coprime, got {p} and {q}")
        if not self.channels:
            raise ConfigError("channels must be non-empty")


@dataclass(frozen=True)
class MrsdConfig:
    """Spectrogram discriminator bank over four STFT resolutions."""

    resolutions: tuple[tuple[int, int, int], ...] = (
        (512, 360, 80),
        (1024, 720, 160),
        (2048, 1440, 320),
        (4096, 2880, 640),
    )
    channels: tuple[int, ...] = (32, 32, 32, 32, 32, 1)
    strides: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (1, 2), (2, 1), (1, 1))
    kernel_size: int = 3
    lrelu_slope: float = 0.1
    log_floor: float = 1e-5

    def __post_init__(self) -> None:
        if len(self.resolutions) != 4:
            raise ConfigError(f"exactly 4 spectrogram resolutions required, got {len(self.resolutions)}")
        for fft, win, hop in self.resolutions:
            if not (hop <= win <= fft):
                raise ConfigError(f"need hop <= window <= fft, got ({fft}, {win}, {hop})")
        if len(self.channels) != len(self.strides):
            raise ConfigError("channels and strides must have equal length")
        if self.channels[-1] != 1:
            raise ConfigError("last conv must map to a single score channel")


@dataclass(frozen=True)
class AuxLossConfig:
    """Spectrogram + phase reconstruction loss resolutions.

    Three STFT triples (fft, window, hop) carry magnitude and phase terms;
    two mel entries (fft, window, hop, n_mels) carry magnitude terms only.
    ``sc_denominator`` selects which signal normalizes spectral convergence:
    "fake" (as defined here) or "real" (the common alternative).
    """

    stft_resolutions: tuple[tuple[int, int, int], ...] = (
        (512, 240, 50),
        (1024, 600, 120),
        (2048, 1200, 240),
    )
    mel_resolutions: tuple[tuple[int, int, int, int], ...] = (
        (2048, 960, 240, 120),
        (1024, 480, 120, 80),
    )
    phase_weight: float = 1.0
    sc_denominator: str = "fake"
    log_floor: float = 1e-5

    def __post_init__(self) -> None:
        if len(self.stft_resolutions) != 3:
            raise ConfigError("exactly 3 STFT resolutions required")
        if len(self.mel_resolutions) != 2:
            raise ConfigError("exactly 2 mel resolutions required")
        if self.sc_denominator not in ("fake", "real"):
            raise ConfigError("sc_denominator must be 'fake' or 'real'")
        if self.phase_weight < 0:
            raise ConfigError("phase_weight must be >= 0")


@dataclass(frozen=True)
class LossWeights:
    adversarial: float = 1.0
    auxiliary: float = 120.0
    feature_match: float = 10.0

    def __post_init__(self) -> None:
        if min(self.adversarial, self.auxiliary, self.feature_match) < 0:
            raise ConfigError("loss weights must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """Alternating GAN training recipe."""

    segment_seconds: float = 4.0
    batch_size: int = 8
    max_iterations: int = 200000
    learning_rate: float = 2e-4
    beta1: float = 0.8
    beta2: float = 0.99
    weight_decay: float = 0.01
    lr_decay: float = 0.999  # exponential, stepped once per epoch
    seed: int = 1234
    checkpoint_interval: int = 10000
    log_interval: int = 50
    grad_clip: float = 0.0  # 0 disables clipping
    noise_std: float = 0.003  # unvoiced excitation noise level

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.segment_seconds <= 0:
            raise ConfigError("segment_seconds must be positive")
        if not (0 < self.lr_decay <= 1):
            raise ConfigError("lr_decay must be in (0, 1]")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")


@dataclass(frozen=True)
class DataConfig:
    """Paths consumed by the training entry point. Relative paths resolve
    against the config file's directory when loaded from disk."""

    manifest: str = ""
    cache_dir: str = "cache"
    out_dir: str = "runs/default"


@dataclass(frozen=True)
class Config:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    mpd: MpdConfig = field(default_factory=MpdConfig)
    mrsd: MrsdConfig = field(default_factory=MrsdConfig)
    aux: AuxLossConfig = field(default_factory=AuxLossConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self) -> None:
        gen, feat = self.generator, self.features
        if gen.total_upsample != feat.stft.hop_length:
            raise ConfigError(
                f"upsample factors {gen.upsample_factors} multiply to {gen.total_upsample}, "
                f"must equal hop_length {feat.stft.hop_length}"
            )
        if gen.condition_channels != feat.n_mels + 1:
            raise ConfigError(
                f"condition_channels must be n_mels + 1 (logF0), "
                f"got {gen.condition_channels} vs {feat.n_mels} mels"
            )
        seg = self.train.segment_seconds * feat.sample_rate
        if abs(seg - round(seg)) > 1e-9 or round(seg) % feat.stft.hop_length != 0:
            raise ConfigError(
                f"segment of {self.train.segment_seconds}s is not a whole number of frames"
            )
        for fft, win, hop in self.aux.stft_resolutions:
            StftConfig(fft_size=fft, window_length=win, hop_length=hop)
        for fft, win, hop, n_mels in self.aux.mel_resolutions:
            StftConfig(fft_size=fft, window_length=win, hop_length=hop)
            if n_mels < 1:
                raise ConfigError("mel resolution needs n_mels >= 1")

    @property
    def segment_frames(self) -> int:
        return round(self.train.segment_seconds * self.features.sample_rate) // self.features.stft.hop_length

    def to_dict(self) -> dict[str, Any]:
        # json round-trip turns tuples into plain lists (YAML-safe).
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def hash(self) -> str:
        """Hash of every trajectory-relevant hyperparameter. Data paths and
        run-length/logging knobs are excluded, so moving a corpus or
        extending max_iterations keeps checkpoints resumable."""
        return trajectory_hash(self.to_dict())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))


def config_hash(obj: Any) -> str:
    """Stable hash of any plain config structure (dict/list/scalars)."""
    blob = json.dumps(obj, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()


def trajectory_hash(cfg_dict: dict[str, Any]) -> str:
    """Hash of a plain config dict restricted to fields that shape the
    training trajectory (used for checkpoint resume compatibility)."""
    pruned = {k: v for k, v in cfg_dict.items() if k != "data"}
    pruned["train"] = {
        k: v
        for k, v in pruned.get("train", {}).items()
        if k not in ("max_iterations", "checkpoint_interval", "log_interval")
    }
    return config_hash(pruned)


def _json_default(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot hash config value of type {type(value)!r}")


def _build(cls: type, data: dict[str, Any], path: str) -> Any:
    """Recursively construct a config dataclass, rejecting unknown keys."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {path}{key!r}")
        ftype = fields[key].type
        if isinstance(value, dict) and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, f"{path}{key}.")
        elif isinstance(value, list):
            kwargs[key] = _as_tuple(value)
        else:
            kwargs[key] = value
        del ftype
    return cls(**kwargs)


def _as_tuple(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_as_tuple(v) for v in value)
    return value


_NESTED: dict[str, type] = {
    "features": FeatureConfig,
    "stft": StftConfig,
    "generator": GeneratorConfig,
    "mpd": MpdConfig,
    "mrsd": MrsdConfig,
    "aux": AuxLossConfig,
    "weights": LossWeights,
    "train": TrainConfig,
    "data": DataConfig,
}


def config_from_dict(data: dict[str, Any]) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return _build(Config, data, "")


def load_config(path: str | Path) -> Config:
    """Load a YAML config file; relative data paths resolve against it."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    cfg = config_from_dict(raw)
    base = path.resolve().parent
    data = cfg.data
    resolved = DataConfig(
        manifest=str(base / data.manifest) if data.manifest and not Path(data.manifest).is_absolute() else data.manifest,
        cache_dir=str(base / data.cache_dir) if not Path(data.cache_dir).is_absolute() else data.cache_dir,
        out_dir=str(base / data.out_dir) if not Path(data.out_dir).is_absolute() else data.out_dir,
    )
    return dataclasses.replace(cfg, data=resolved)


def desk_config() -> Config:
    """Small preset for CPU smoke runs: 0.5 s segments, thin channels."""
    return Config(
        generator=GeneratorConfig(
            residual_channels=16,
            gate_channels=32,
            skip_channels=16,
            upsample_channels=8,
        ),
        mpd=MpdConfig(channels=(4, 8, 16, 16, 16)),
        mrsd=MrsdConfig(channels=(4, 4, 4, 4, 4, 1)),
        train=TrainConfig(
            segment_seconds=0.5,
            batch_size=2,
            max_iterations=500,
            checkpoint_interval=250,
            log_interval=10,
        ),
    )


def full_config() -> Config:
    """Reference-scale preset (train on GPU-class hardware)."""
    return Config(
        generator=GeneratorConfig(
            residual_channels=96,
            gate_channels=192,
            skip_channels=96,
            upsample_channels=121,
        ),
    )


PRESETS = {"desk": desk_config, "full": full_config}


def preset_config(name: str) -> Config:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
