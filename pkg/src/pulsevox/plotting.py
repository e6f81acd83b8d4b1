"""Diagnostic rendering: log-mel spectrogram, waveform, and pulse panels."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .cache import FeatureBundle
from .pulse import PulseSequence


def render_diagnostics(
    bundle: FeatureBundle,
    out_path: str | Path,
    wave: np.ndarray | None = None,
    pulse: PulseSequence | None = None,
    dpi: int = 100,
) -> Path:
    """Write a raster image with mel, waveform, and pulse panels.

    Output is deterministic for fixed inputs (Agg backend, fixed dpi).
    """
    panels = 1 + (wave is not None) + (pulse is not None)
    fig, axes = plt.subplots(panels, 1, figsize=(10, 2.6 * panels), squeeze=False)
    axes = axes[:, 0]

    hop = bundle.hop_length
    sr = bundle.sample_rate
    ax = axes[0]
    extent = (0, bundle.n_frames * hop / sr, 0, bundle.mel.shape[1])
    ax.imshow(bundle.mel.T, origin="lower", aspect="auto", extent=extent, cmap="magma")
    ax.set_ylabel("mel channel")
    ax.set_title("log-mel spectrogram")

    idx = 1
    if wave is not None:
        ax = axes[idx]
        t = np.arange(wave.size) / sr
        ax.plot(t, wave, linewidth=0.4)
        ax.set_ylabel("amplitude")
        ax.set_title("waveform")
        ax.set_xlim(0, t[-1] if t.size else 1)
        idx += 1
    if pulse is not None:
        ax = axes[idx]
        t = np.arange(pulse.length) / sr
        ax.plot(t, pulse.values, linewidth=0.4, color="tab:green")
        ax.set_ylabel("excitation")
        ax.set_title("pulse sequence")
        ax.set_xlim(0, t[-1] if t.size else 1)

    axes[-1].set_xlabel("time [s]")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    return out_path
