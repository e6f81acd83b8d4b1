"""Command-line operator surface.

Subcommands: extract / train / synthesize / evaluate / plot. The config
file (or a named preset) is the single source of truth for every
hyperparameter; flags only select config, preset, seed, output paths, and
resume behavior. Exit codes: 0 success, 1 partial failure, 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .errors import PulsevoxError

log = logging.getLogger("pulsevox")

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2

CACHE_ENV_VAR = "PULSEVOX_CACHE_DIR"


def _load_config(args: argparse.Namespace):
    from .config import load_config, preset_config

    if getattr(args, "config", None):
        return load_config(args.config)
    return preset_config(getattr(args, "preset", None) or "desk")


def _cache_dir(args: argparse.Namespace, cfg) -> Path:
    if getattr(args, "cache_dir", None):
        return Path(args.cache_dir)
    if os.environ.get(CACHE_ENV_VAR):
        return Path(os.environ[CACHE_ENV_VAR])
    return Path(cfg.data.cache_dir)


def cmd_extract(args: argparse.Namespace) -> int:
    from .cache import cache_features, read_manifest, save_stats
    from .features import compute_stats

    cfg = _load_config(args)
    paths = read_manifest(args.manifest)
    if not paths:
        print("error: empty manifest", file=sys.stderr)
        return EXIT_USAGE
    cache_dir = Path(args.out) if args.out else _cache_dir(args, cfg)
    cached = computed = 0
    failures: list[str] = []
    mels = []
    for path in paths:
        try:
            bundle, hit = cache_features(path, cache_dir, cfg.features)
        except (PulsevoxError, OSError) as exc:
            failures.append(f"{path}: {exc}")
            continue
        mels.append(bundle.mel)
        cached += hit
        computed += not hit
    if mels:
        save_stats(cache_dir / "stats.npz", compute_stats(mels))
    print(f"extract: {computed} computed, {cached} cache hits, {len(failures)} failed")
    for failure in failures:
        print(f"  failed: {failure}", file=sys.stderr)
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from .training import fit

    if args.resume and args.fresh:
        print("error: --resume and --fresh are mutually exclusive", file=sys.stderr)
        return EXIT_USAGE
    cfg = _load_config(args)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=args.seed))
    manifest = args.manifest or (cfg.data.manifest or None)
    if manifest is None:
        print("error: no manifest given (flag or config data.manifest)", file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out or cfg.data.out_dir
    final = fit(cfg, manifest=manifest, out_dir=out_dir, resume=args.resume)
    print(f"train: finished, final checkpoint {final}")
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    from .audio import load_wav, save_wav
    from .cache import load_features
    from .synthesis import Synthesizer

    synth = Synthesizer.from_checkpoint(args.checkpoint)
    source = Path(args.input)
    t0 = time.perf_counter()
    if source.suffix.lower() == ".wav":
        clip = load_wav(source, expected_rate=synth.config.features.sample_rate)
        out_clip, _ = synth.copy_synthesize(clip, seed=args.seed)
    else:
        bundle = load_features(source)
        out_clip = synth.synthesize(bundle, seed=args.seed)
    synth_seconds = time.perf_counter() - t0
    out = Path(args.out or source.with_suffix(".synth.wav"))
    save_wav(out, out_clip)
    rtf = synth_seconds / out_clip.duration
    print(
        f"synthesize: wrote {out} ({out_clip.duration:.3f}s audio, "
        f"{synth_seconds:.3f}s wall, RTF {rtf:.4f})"
    )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .cache import read_manifest
    from .evaluate import evaluate_corpus
    from .synthesis import Synthesizer

    synth = Synthesizer.from_checkpoint(args.checkpoint)
    manifest = read_manifest(args.manifest)
    if not manifest:
        print("error: empty manifest", file=sys.stderr)
        return EXIT_USAGE
    report = evaluate_corpus(synth, manifest, seed=args.seed)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
        print(f"evaluate: report written to {args.out}")
    print(text)
    return EXIT_FAILURES if report.skipped else EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from .plotting import render_diagnostics

    source = Path(args.input)
    cfg = _load_config(args)
    if source.suffix.lower() == ".wav":
        from .audio import load_wav
        from .cache import extract_bundle

        clip = load_wav(source, expected_rate=cfg.features.sample_rate)
        bundle = extract_bundle(clip, cfg.features, source=str(source))
        wave = clip.samples
    else:
        from .cache import load_features

        bundle = load_features(source)
        wave = None
    from .features import FeatureStats, compute_stats
    from .pulse import extract_pulse

    stats = compute_stats([bundle.mel])
    pulse = extract_pulse(
        stats.normalize(bundle.mel),
        bundle.f0,
        bundle.vuv,
        sample_rate=bundle.sample_rate,
        hop_length=bundle.hop_length,
        noise_std=cfg.train.noise_std,
        seed=args.seed,
    )
    out = Path(args.out or source.with_suffix(".png"))
    render_diagnostics(bundle, out, wave=wave, pulse=pulse)
    print(f"plot: wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsevox",
        description="Pulse-conditioned adversarial vocoder for 48 kHz singing voices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, seed_default: int | None = 0) -> None:
        p.add_argument("--config", help="YAML config path")
        p.add_argument("--preset", choices=["desk", "full"], help="built-in config preset")
        p.add_argument("--seed", type=int, default=seed_default, help="random seed")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("extract", help="populate the feature cache from a manifest")
    p.add_argument("manifest")
    p.add_argument("--cache-dir", help=f"cache root (default: ${CACHE_ENV_VAR} or config)")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="run adversarial training")
    p.add_argument("--manifest", help="training manifest (overrides config data.manifest)")
    p.add_argument("--resume", metavar="latest|PATH", help="continue from a checkpoint")
    p.add_argument("--fresh", action="store_true", help="force a fresh run")
    common(p, seed_default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="vocode features (or copy-synthesize a WAV)")
    p.add_argument("checkpoint")
    p.add_argument("input", help="feature .npz or .wav for copy synthesis")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="objective metrics over a manifest")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="render diagnostic panels")
    p.add_argument("input", help="feature .npz or .wav")
    common(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PulsevoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
