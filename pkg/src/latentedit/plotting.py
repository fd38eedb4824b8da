"""Report figures written next to the CSV outputs.

Figures use the non-interactive Agg backend and strip the ``Software``
metadata key so identical inputs give identical PNG bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def _show(ax, img):
    img = np.clip(np.asarray(img), 0.0, 1.0)
    if img.shape[2] == 1:
        ax.imshow(img[:, :, 0], cmap="gray", vmin=0.0, vmax=1.0)
    else:
        ax.imshow(img)
    ax.set_xticks([])
    ax.set_yticks([])


def loss_trace(trace, path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        trace = np.asarray(trace)
        it = np.arange(len(trace))
        ax.semilogy(it, np.maximum(trace, 1e-300), lw=1.0, label="loss")
        ax.semilogy(it, np.maximum(np.minimum.accumulate(trace), 1e-300), lw=1.0,
                    ls="--", label="best so far")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def image_strip(images: Sequence[np.ndarray], labels: Sequence[str], path,
                title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(images), figsize=(1.4 * len(images), 1.7), squeeze=False)
        for ax, img, lab in zip(axes[0], images, labels):
            _show(ax, img)
            ax.set_title(lab)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def correlation_heatmap(matrix, names: Sequence[str], path) -> Path:
    with plt.rc_context(STYLE):
        k = len(names)
        fig, ax = plt.subplots(figsize=(1.0 + 0.8 * k, 0.8 + 0.7 * k))
        im = ax.imshow(matrix, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
        ax.set_xticks(range(k), names, rotation=45, ha="right")
        ax.set_yticks(range(k), names)
        for i in range(k):
            for j in range(k):
                ax.text(j, i, f"{matrix[i][j]:.3f}", ha="center", va="center", fontsize=7)
        fig.colorbar(im, ax=ax, shrink=0.8)
        return _save(fig, path)


def statistic_curves(alphas, curves: Sequence[Sequence[float]], path,
                     ylabel: str = "central brightness") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.6))
        for c in curves:
            ax.plot(alphas, c, marker="o", ms=3, lw=0.8, color="0.3", alpha=0.7)
        ax.set_xlabel("alpha")
        ax.set_ylabel(ylabel)
        return _save(fig, path)
