"""Figure rendering for experiment reports.

All figures are written to files (no interactive backend); each helper
takes data already computed by the pipeline and an output path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def characterization_figure(rows, path) -> None:
    """Bar chart of MFR and ISI per experiment (one run of the suite)."""
    names = [r.experiment for r in rows]
    mfr = [r.stats.mfr_mean for r in rows]
    mfr_sd = [r.stats.mfr_std for r in rows]
    isi = [np.nan_to_num(r.stats.isi_mean) for r in rows]
    isi_sd = [np.nan_to_num(r.stats.isi_std) for r in rows]
    x = np.arange(len(names))
    fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    axes[0].bar(x, mfr, yerr=mfr_sd, color="tab:blue", capsize=2)
    axes[0].set_ylabel("MFR (Hz)")
    axes[1].bar(x, isi, yerr=isi_sd, color="tab:orange", capsize=2)
    axes[1].set_ylabel("mean ISI (s)")
    axes[1].set_xticks(x)
    axes[1].set_xticklabels(names, rotation=45, ha="right")
    fig.suptitle("Motion-segmentation characterization")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_figure(labels, mfr, isi, path) -> None:
    """MFR and ISI across kernel-parameter variants."""
    x = np.arange(len(labels))
    fig, ax1 = plt.subplots(figsize=(8, 4))
    ax1.plot(x, mfr, "o-", color="tab:blue", label="MFR")
    ax1.set_ylabel("MFR (Hz)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(x, isi, "s--", color="tab:orange", label="ISI")
    ax2.set_ylabel("mean ISI (s)", color="tab:orange")
    ax1.set_xticks(x)
    ax1.set_xticklabels(labels, rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def trajectory_figure(rows, path) -> None:
    """Closed-loop pan/tilt positions and salient-point track."""
    its = [r.iteration for r in rows]
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    axes[0].plot(its, [r.pan_pos for r in rows], "o-", label="pan")
    axes[0].plot(its, [r.tilt_pos for r in rows], "s-", label="tilt")
    axes[0].set_ylabel("PTU position")
    axes[0].legend()
    axes[1].plot(its, [r.p_x for r in rows], "o-", label="P_x")
    axes[1].plot(its, [r.p_y for r in rows], "s-", label="P_y")
    axes[1].axhline(64, color="gray", lw=0.5)
    axes[1].set_ylabel("salient point (px)")
    axes[1].set_xlabel("iteration")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def saliency_figure(grid, point, path) -> None:
    """Saliency heat map with the selected point marked."""
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(grid, cmap="viridis")
    ax.plot(point[0], point[1], "r+", markersize=12, markeredgewidth=2)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("saliency")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
