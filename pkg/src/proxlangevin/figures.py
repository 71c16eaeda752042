"""Matplotlib figure rendering for experiment reports.

Every experiment writes its tabular results as CSV and renders the
corresponding curves and heatmaps as PNG figures next to them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_curves", "save_heatmap", "save_image_row"]


def save_curves(path, curves, xlabel="", ylabel="", title="", logx=False,
                logy=False, styles=None):
    """Render a family of labelled curves.

    `curves` maps label -> (x, y); dashed styles can be forced per label
    via `styles` (label -> matplotlib linestyle), e.g. to distinguish
    measured values from theoretical bounds.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, (x, y) in curves.items():
        style = (styles or {}).get(label, "-")
        ax.plot(x, y, style, label=label, linewidth=1.4)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_heatmap(path, image, title="", log=False, cmap="viridis"):
    """Render one image with a colorbar; optionally on a log10 scale."""
    image = np.asarray(image, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    data = np.log10(np.maximum(image, 1e-12)) if log else image
    im = ax.imshow(data, cmap=cmap, interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_image_row(path, images, titles=None, cmap="gray", vmin=None, vmax=None):
    """Render several grayscale images side by side for visual comparison."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 3.2))
    if n == 1:
        axes = [axes]
    for i, (ax, img) in enumerate(zip(axes, images)):
        ax.imshow(np.asarray(img, dtype=float), cmap=cmap,
                  interpolation="nearest", vmin=vmin, vmax=vmax)
        if titles:
            ax.set_title(titles[i], fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
