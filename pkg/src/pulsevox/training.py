"""Alternating adversarial training: batching of fixed-length segments,
optimizer/scheduler state, checkpointing, and metric logging.

Determinism contract: given the same seed and data order, two runs (or a
run interrupted and resumed from a checkpoint) produce identical loss
trajectories. Everything stochastic flows through two generators that
are both serialized in checkpoints: one numpy Generator for data order /
segment offsets / pulse noise seeds, and the global torch RNG for model
init and input noise.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch

from .audio import load_wav
from .cache import FeatureBundle, cache_features, read_manifest, save_stats
from .config import Config
from .errors import CheckpointError, InvalidInput, TrainingDiverged
from .features import FeatureStats, compute_stats
from .generator import Generator
from .discriminators import Discriminators
from .losses import (
    adversarial_g_loss,
    aux_spectrogram_phase_loss,
    discriminator_total_loss,
    feature_match_loss,
    generator_total_loss,
)
from .pulse import extract_pulse

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def sample_segment(
    bundle: FeatureBundle,
    wave: np.ndarray,
    seg_frames: int,
    rng: np.random.Generator,
    mel_fill: float = np.log(1e-5),
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Draw a frame-aligned (mel, f0, vuv, wave) slice of seg_frames frames.

    The waveform is zero-padded to frames * hop so the slice
    [f * hop, (f + seg_frames) * hop) always exists; utterances shorter
    than one segment are right-padded with silent, unvoiced frames.
    """
    hop = bundle.hop_length
    mel, f0, vuv = bundle.mel, bundle.f0, bundle.vuv
    n = bundle.n_frames
    if n < seg_frames:
        pad = seg_frames - n
        mel = np.concatenate([mel, np.full((pad, mel.shape[1]), mel_fill)])
        f0 = np.concatenate([f0, np.zeros(pad)])
        vuv = np.concatenate([vuv, np.zeros(pad, dtype=vuv.dtype)])
        n = seg_frames
    total = n * hop
    if wave.size < total:
        wave = np.concatenate([wave, np.zeros(total - wave.size)])
    offset = int(rng.integers(0, n - seg_frames + 1))
    sl = slice(offset, offset + seg_frames)
    return (
        mel[sl],
        f0[sl],
        vuv[sl],
        wave[offset * hop : (offset + seg_frames) * hop],
    )


class SegmentSampler:
    """Shuffled-per-epoch clip scheduler with serializable state."""

    def __init__(self, n_clips: int, batch_size: int, seed: int):
        if n_clips < 1:
            raise InvalidInput("need at least one clip to sample from")
        self.n_clips = n_clips
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self.epoch = 0
        self._order = self.rng.permutation(n_clips)
        self._cursor = 0

    def next_batch(self) -> list[int]:
        out: list[int] = []
        while len(out) < self.batch_size:
            if self._cursor >= self.n_clips:
                self._order = self.rng.permutation(self.n_clips)
                self._cursor = 0
                self.epoch += 1
            out.append(int(self._order[self._cursor]))
            self._cursor += 1
        return out

    def state(self) -> dict[str, Any]:
        return {
            "rng_state": self.rng.bit_generator.state,
            "order": self._order.tolist(),
            "cursor": self._cursor,
            "epoch": self.epoch,
        }

    def load_state(self, state: dict[str, Any]) -> None:
        self.rng.bit_generator.state = state["rng_state"]
        self._order = np.asarray(state["order"], dtype=np.int64)
        self._cursor = int(state["cursor"])
        self.epoch = int(state["epoch"])


@dataclass
class TrainState:
    config: Config
    generator: Generator
    discriminator: Discriminators
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    sched_g: torch.optim.lr_scheduler.ExponentialLR
    sched_d: torch.optim.lr_scheduler.ExponentialLR
    sampler: SegmentSampler
    stats: FeatureStats
    iteration: int = 0
    epoch: int = 0
    metrics: list = field(default_factory=list, repr=False)


def build_state(cfg: Config, stats: FeatureStats, n_clips: int) -> TrainState:
    torch.manual_seed(cfg.train.seed)
    generator = Generator(cfg.generator)
    discriminator = Discriminators(cfg.mpd, cfg.mrsd)
    t = cfg.train
    opt_g = torch.optim.AdamW(
        generator.parameters(), lr=t.learning_rate, betas=(t.beta1, t.beta2), weight_decay=t.weight_decay
    )
    opt_d = torch.optim.AdamW(
        discriminator.parameters(), lr=t.learning_rate, betas=(t.beta1, t.beta2), weight_decay=t.weight_decay
    )
    sched_g = torch.optim.lr_scheduler.ExponentialLR(opt_g, gamma=t.lr_decay)
    sched_d = torch.optim.lr_scheduler.ExponentialLR(opt_d, gamma=t.lr_decay)
    sampler = SegmentSampler(n_clips, t.batch_size, t.seed)
    return TrainState(
        config=cfg,
        generator=generator,
        discriminator=discriminator,
        opt_g=opt_g,
        opt_d=opt_d,
        sched_g=sched_g,
        sched_d=sched_d,
        sampler=sampler,
        stats=stats,
    )


def assemble_batch(
    bundles: Sequence[FeatureBundle],
    waves: Sequence[np.ndarray],
    indices: Sequence[int],
    cfg: Config,
    stats: FeatureStats,
    rng: np.random.Generator,
) -> dict[str, torch.Tensor]:
    """Slice segments and build (condition, pulse, wave) training tensors."""
    seg = cfg.segment_frames
    hop = cfg.features.stft.hop_length
    conds, pulses, targets = [], [], []
    for i in indices:
        mel, f0, vuv, wave = sample_segment(
            bundles[i], waves[i], seg, rng, mel_fill=np.log(cfg.features.log_floor)
        )
        norm_mel = stats.normalize(mel)
        logf0 = np.where(vuv == 1, np.log(np.maximum(f0, 1.0)), 0.0)
        cond = np.concatenate([norm_mel, logf0[:, None]], axis=1)
        pulse = extract_pulse(
            norm_mel,
            f0,
            vuv,
            sample_rate=cfg.features.sample_rate,
            hop_length=hop,
            noise_std=cfg.train.noise_std,
            seed=int(rng.integers(0, 2**63)),
        )
        conds.append(torch.from_numpy(cond.T).float())
        pulses.append(torch.from_numpy(pulse.values).float())
        targets.append(torch.from_numpy(np.asarray(wave)).float())
    return {
        "condition": torch.stack(conds),
        "pulse": torch.stack(pulses),
        "wave": torch.stack(targets),
    }


def _grad_norm(module: torch.nn.Module) -> float:
    total = 0.0
    for p in module.parameters():
        if p.grad is not None:
            total += float(p.grad.detach().pow(2).sum())
    return total**0.5


def _check_finite(name: str, value: torch.Tensor, batch: dict[str, torch.Tensor], out_dir: Path | None) -> None:
    if torch.isfinite(value).all():
        return
    dump = ""
    if out_dir is not None:
        dump_path = Path(out_dir) / "diverged_batch.npz"
        np.savez(dump_path, **{k: v.detach().cpu().numpy() for k, v in batch.items()})
        dump = f"; offending batch dumped to {dump_path}"
    raise TrainingDiverged(f"{name} became non-finite{dump}")


def train_step(
    batch: dict[str, torch.Tensor], state: TrainState, out_dir: Path | None = None
) -> dict[str, float]:
    """One discriminator update on the detached fake, then one generator
    update against fresh discriminator outputs."""
    cfg = state.config
    g, d = state.generator, state.discriminator
    cond, pulse, wave = batch["condition"], batch["pulse"], batch["wave"]
    t0 = time.perf_counter()

    noise = torch.randn(cond.shape[0], cfg.generator.noise_channels, cond.shape[2])
    fake = g(noise, cond, pulse if cfg.generator.use_pulse else None)

    real_out = d(wave)
    fake_out_detached = d(fake.detach())
    loss_d = discriminator_total_loss(real_out.scores, fake_out_detached.scores)
    _check_finite("discriminator loss", loss_d, batch, out_dir)
    state.opt_d.zero_grad(set_to_none=True)
    loss_d.backward()
    if cfg.train.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(d.parameters(), cfg.train.grad_clip)
    grad_d = _grad_norm(d)
    state.opt_d.step()

    fake_out = d(fake)
    with torch.no_grad():
        real_out_ref = d(wave)
    adv = adversarial_g_loss(fake_out.scores)
    aux = aux_spectrogram_phase_loss(fake, wave, cfg.aux, cfg.features.sample_rate)
    fm = feature_match_loss(real_out_ref, fake_out)
    loss_g = generator_total_loss(adv, aux, fm, cfg.weights)
    _check_finite("generator loss", loss_g, batch, out_dir)
    state.opt_g.zero_grad(set_to_none=True)
    loss_g.backward()
    if cfg.train.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(g.parameters(), cfg.train.grad_clip)
    grad_g = _grad_norm(g)
    state.opt_g.step()

    state.iteration += 1
    return {
        "iteration": state.iteration,
        "epoch": state.sampler.epoch,
        "loss_d": float(loss_d.detach()),
        "loss_g": float(loss_g.detach()),
        "adversarial_g": float(adv.detach()),
        "auxiliary": float(aux.detach()),
        "feature_match": float(fm.detach()),
        "lr": float(state.sched_g.get_last_lr()[0]),
        "grad_norm_g": grad_g,
        "grad_norm_d": grad_d,
        "step_seconds": time.perf_counter() - t0,
    }


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    """Atomic write of the complete resumable training state."""
    path = Path(path)
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "config_hash": state.config.hash(),
        "iteration": state.iteration,
        "epoch": state.epoch,
        "generator": state.generator.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "opt_g": state.opt_g.state_dict(),
        "opt_d": state.opt_d.state_dict(),
        "sched_g": state.sched_g.state_dict(),
        "sched_d": state.sched_d.state_dict(),
        "torch_rng": torch.get_rng_state(),
        "sampler": state.sampler.state(),
        "stats_mean": state.stats.mean,
        "stats_std": state.stats.std,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    import os

    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    """Read and integrity-check a checkpoint payload."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    from .config import trajectory_hash

    if trajectory_hash(payload["config"]) != payload["config_hash"]:
        raise CheckpointError(f"{path}: embedded config fails its hash check")
    return payload


def restore_state(payload: dict[str, Any], cfg: Config | None = None) -> TrainState:
    """Rebuild a TrainState from a checkpoint payload.

    If ``cfg`` is given it must hash-match the embedded config (resuming
    under a trajectory-relevant config change is refused; extending
    max_iterations or changing logging cadence is fine and the passed
    cfg's values win)."""
    from .config import config_from_dict

    if cfg is not None and cfg.hash() != payload["config_hash"]:
        raise CheckpointError(
            "checkpoint was written with a different config; "
            "pass the original config or start fresh"
        )
    if cfg is None:
        cfg = config_from_dict(payload["config"])
    stats = FeatureStats(mean=payload["stats_mean"], std=payload["stats_std"])
    state = build_state(cfg, stats, n_clips=max(1, len(payload["sampler"]["order"])))
    state.generator.load_state_dict(payload["generator"])
    state.discriminator.load_state_dict(payload["discriminator"])
    state.opt_g.load_state_dict(payload["opt_g"])
    state.opt_d.load_state_dict(payload["opt_d"])
    state.sched_g.load_state_dict(payload["sched_g"])
    state.sched_d.load_state_dict(payload["sched_d"])
    state.sampler.load_state(payload["sampler"])
    state.iteration = int(payload["iteration"])
    state.epoch = int(payload["epoch"])
    torch.set_rng_state(payload["torch_rng"])
    return state


@lru_cache(maxsize=64)
def _cached_wave(path: str, sample_rate: int) -> np.ndarray:
    return load_wav(path, expected_rate=sample_rate).samples


class MetricsWriter:
    """Append-only newline-delimited JSON metrics log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record: dict[str, Any]) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record) + "\n")


def prepare_corpus(
    manifest: Sequence[str | Path], cache_dir: str | Path, cfg: Config
) -> tuple[list[FeatureBundle], list[np.ndarray], FeatureStats]:
    """Cache features for every clip, load waves, fit corpus statistics."""
    if not manifest:
        raise InvalidInput("empty manifest")
    bundles, waves = [], []
    for clip_path in manifest:
        bundle, _ = cache_features(clip_path, cache_dir, cfg.features)
        bundles.append(bundle)
        waves.append(_cached_wave(str(clip_path), cfg.features.sample_rate))
    stats = compute_stats([b.mel for b in bundles])
    return bundles, waves, stats


def fit(
    cfg: Config,
    manifest: Sequence[str | Path] | str | Path | None = None,
    out_dir: str | Path | None = None,
    resume: str | Path | None = None,
) -> Path:
    """Run training to cfg.train.max_iterations; returns the final checkpoint path.

    ``manifest`` may be a list of WAV paths or a manifest file path; when
    omitted, cfg.data.manifest is used. ``resume`` accepts a checkpoint
    path or the literal "latest" (resolved inside ``out_dir``).
    """
    torch.set_flush_denormal(True)
    if manifest is None:
        manifest = cfg.data.manifest
    if isinstance(manifest, (str, Path)):
        manifest = read_manifest(manifest)
    out_dir = Path(out_dir if out_dir is not None else cfg.data.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(cfg.data.cache_dir) if cfg.data.cache_dir else out_dir / "cache"

    bundles, waves, stats = prepare_corpus(manifest, cache_dir, cfg)
    save_stats(out_dir / "stats.npz", stats)

    if resume is not None:
        resume_path = out_dir / "latest.pt" if str(resume) == "latest" else Path(resume)
        payload = load_checkpoint(resume_path)
        state = restore_state(payload, cfg)
        if state.sampler.n_clips != len(bundles):
            raise CheckpointError(
                f"checkpoint saw {state.sampler.n_clips} clips, manifest has {len(bundles)}"
            )
        log.info("resumed from %s at iteration %d", resume_path, state.iteration)
    else:
        state = build_state(cfg, stats, n_clips=len(bundles))

    cfg.save(out_dir / "config.yaml")
    metrics = MetricsWriter(out_dir / "metrics.ndjson")

    checkpoint_path = out_dir / "latest.pt"
    while state.iteration < cfg.train.max_iterations:
        indices = state.sampler.next_batch()
        # decay once per completed data pass, before the epoch's first update
        for _ in range(state.sampler.epoch - state.epoch):
            state.sched_g.step()
            state.sched_d.step()
        state.epoch = state.sampler.epoch
        batch = assemble_batch(bundles, waves, indices, cfg, stats, state.sampler.rng)
        record = train_step(batch, state, out_dir=out_dir)
        if state.iteration % cfg.train.log_interval == 0 or state.iteration == 1:
            metrics.write(record)
            log.info(
                "iter %d: loss_g=%.4f loss_d=%.4f aux=%.4f",
                state.iteration,
                record["loss_g"],
                record["loss_d"],
                record["auxiliary"],
            )
        if state.iteration % cfg.train.checkpoint_interval == 0:
            numbered = out_dir / f"checkpoint-{state.iteration:08d}.pt"
            save_checkpoint(state, numbered)
            shutil.copyfile(numbered, checkpoint_path)
    save_checkpoint(state, checkpoint_path)
    return checkpoint_path
