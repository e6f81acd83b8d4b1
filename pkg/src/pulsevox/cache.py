"""On-disk feature cache: one .npz per utterance, keyed by audio content
hash + feature-config hash.

Writes go through a temp file and an atomic rename, so concurrent
extraction of the same clip is safe (both writers produce identical
bytes; last rename wins). A corrupt or stale entry is recomputed with a
warning rather than failing the run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, load_wav
from .config import FeatureConfig, config_hash
from .errors import InvalidInput
from .features import FeatureStats, mel_spectrogram
from .pitch import extract_f0

log = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureBundle:
    """Per-utterance features, frame-aligned (equal frame counts)."""

    mel: np.ndarray  # (frames, n_mels) raw log-mel
    f0: np.ndarray  # (frames,) Hz, 0 where unvoiced
    vuv: np.ndarray  # (frames,) uint8
    sample_rate: int
    hop_length: int
    source: str = ""
    content_hash: str = ""
    config_hash: str = ""

    def __post_init__(self) -> None:
        if not (self.mel.shape[0] == self.f0.size == self.vuv.size):
            raise InvalidInput(
                f"misaligned features: {self.mel.shape[0]} mel frames, "
                f"{self.f0.size} f0 frames, {self.vuv.size} vuv frames"
            )

    @property
    def n_frames(self) -> int:
        return self.mel.shape[0]

    @property
    def logf0(self) -> np.ndarray:
        """Natural log of f0 on voiced frames, 0 elsewhere."""
        return np.where(self.vuv == 1, np.log(np.maximum(self.f0, 1.0)), 0.0)


def content_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def feature_config_hash(cfg: FeatureConfig) -> str:
    return config_hash(dataclasses.asdict(cfg))


def cache_key(clip_path: str | Path, cfg: FeatureConfig) -> str:
    """Joint key over audio bytes and feature config."""
    joint = content_hash(clip_path) + feature_config_hash(cfg)
    return hashlib.sha256(joint.encode()).hexdigest()


def cache_path(clip_path: str | Path, out_dir: str | Path, cfg: FeatureConfig) -> Path:
    key = cache_key(clip_path, cfg)
    return Path(out_dir) / f"{Path(clip_path).stem}.{key[:16]}.npz"


def extract_bundle(clip: AudioClip, cfg: FeatureConfig, source: str = "") -> FeatureBundle:
    """Compute mel + pitch features for a clip (no caching)."""
    mel = mel_spectrogram(
        clip, cfg.stft, n_mels=cfg.n_mels, fmin=cfg.fmin, fmax=cfg.fmax, log_floor=cfg.log_floor
    )
    track = extract_f0(
        clip,
        frame_rate=cfg.frame_rate,
        f0_min=cfg.f0_min,
        f0_max=cfg.f0_max,
        threshold=cfg.voicing_threshold,
    )
    if track.n_frames != mel.n_frames:
        raise InvalidInput(
            f"internal frame misalignment: {mel.n_frames} mel vs {track.n_frames} pitch frames"
        )
    return FeatureBundle(
        mel=mel.values,
        f0=track.f0,
        vuv=track.vuv,
        sample_rate=clip.sample_rate,
        hop_length=cfg.stft.hop_length,
        source=source,
        config_hash=feature_config_hash(cfg),
    )


def _write_atomic(path: Path, bundle: FeatureBundle) -> None:
    meta = {
        "version": CACHE_FORMAT_VERSION,
        "sample_rate": bundle.sample_rate,
        "hop_length": bundle.hop_length,
        "source": bundle.source,
        "content_hash": bundle.content_hash,
        "config_hash": bundle.config_hash,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(
                fh,
                mel=bundle.mel,
                f0=bundle.f0,
                vuv=bundle.vuv,
                meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_features(path: str | Path) -> FeatureBundle:
    """Read a cached bundle; raises InvalidInput on a corrupt entry."""
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("version") != CACHE_FORMAT_VERSION:
                raise InvalidInput(
                    f"{path}: cache format version {meta.get('version')} unsupported"
                )
            return FeatureBundle(
                mel=data["mel"],
                f0=data["f0"],
                vuv=data["vuv"],
                sample_rate=int(meta["sample_rate"]),
                hop_length=int(meta["hop_length"]),
                source=meta.get("source", ""),
                content_hash=meta.get("content_hash", ""),
                config_hash=meta.get("config_hash", ""),
            )
    except InvalidInput:
        raise
    except Exception as exc:
        raise InvalidInput(f"corrupt feature cache entry {path}: {exc}") from exc


def cache_features(
    clip_path: str | Path, out_dir: str | Path, cfg: FeatureConfig
) -> tuple[FeatureBundle, bool]:
    """Return (bundle, was_cached). Recomputes on miss, corruption, or
    config change (the key embeds the config hash, so a changed config
    simply misses)."""
    clip_path = Path(clip_path)
    chash = content_hash(clip_path)
    path = cache_path(clip_path, out_dir, cfg)
    if path.exists():
        try:
            return load_features(path), True
        except InvalidInput as exc:
            log.warning("recomputing features: %s", exc)
    clip = load_wav(clip_path, expected_rate=cfg.sample_rate)
    bundle = extract_bundle(clip, cfg, source=str(clip_path))
    bundle = dataclasses.replace(bundle, content_hash=chash)
    _write_atomic(path, bundle)
    return bundle, False


def read_manifest(path: str | Path) -> list[Path]:
    """Newline-delimited WAV paths; blank lines and '#' comments skipped.
    Relative entries resolve against the manifest's directory."""
    path = Path(path)
    base = path.resolve().parent
    entries = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        entries.append(p if p.is_absolute() else base / p)
    return entries


def save_stats(path: str | Path, stats: FeatureStats) -> None:
    np.savez(path, mean=stats.mean, std=stats.std)


def load_stats(path: str | Path) -> FeatureStats:
    with np.load(path) as data:
        return FeatureStats(mean=data["mean"], std=data["std"])
