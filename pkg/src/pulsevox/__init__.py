"""Pulse-conditioned adversarial neural vocoder for 48 kHz singing voices."""

from .audio import AudioClip, load_wav, save_wav
from .cache import FeatureBundle, cache_features, extract_bundle, load_features, read_manifest
from .config import (
    AuxLossConfig,
    Config,
    FeatureConfig,
    GeneratorConfig,
    LossWeights,
    MpdConfig,
    MrsdConfig,
    StftConfig,
    TrainConfig,
    desk_config,
    full_config,
    load_config,
)
from .discriminators import (
    DiscriminatorOutput,
    Discriminators,
    MultiPeriodDiscriminator,
    MultiResolutionSpectrogramDiscriminator,
    reshape_period,
)
from .errors import CheckpointError, ConfigError, InvalidInput, PulsevoxError, TrainingDiverged
from .features import (
    FeatureStats,
    MelSpectrogram,
    compute_stats,
    frame_count,
    mel_filter_bank,
    mel_spectrogram,
    stft,
)
from .generator import Generator, count_parameters, receptive_field
from .pitch import PitchTrack, extract_f0
from .pulse import PulseSequence, extract_pulse, pulse_oracle
from .synthesis import Synthesizer
from .training import TrainState, fit, sample_segment, train_step

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "AuxLossConfig",
    "CheckpointError",
    "Config",
    "ConfigError",
    "DiscriminatorOutput",
    "Discriminators",
    "FeatureBundle",
    "FeatureConfig",
    "FeatureStats",
    "Generator",
    "GeneratorConfig",
    "InvalidInput",
    "LossWeights",
    "MelSpectrogram",
    "MpdConfig",
    "MrsdConfig",
    "MultiPeriodDiscriminator",
    "MultiResolutionSpectrogramDiscriminator",
    "PitchTrack",
    "PulseSequence",
    "PulsevoxError",
    "StftConfig",
    "Synthesizer",
    "TrainConfig",
    "TrainState",
    "TrainingDiverged",
    "cache_features",
    "compute_stats",
    "count_parameters",
    "desk_config",
    "extract_bundle",
    "extract_f0",
    "extract_pulse",
    "fit",
    "frame_count",
    "full_config",
    "load_config",
    "load_features",
    "load_wav",
    "mel_filter_bank",
    "mel_spectrogram",
    "pulse_oracle",
    "read_manifest",
    "receptive_field",
    "reshape_period",
    "sample_segment",
    "save_wav",
    "stft",
    "train_step",
]
