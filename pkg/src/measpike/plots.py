"""File-based SVG renders of PR curves and confusion-matrix heatmaps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "measpike"  # deterministic element ids
import matplotlib.pyplot as plt
import numpy as np

from .dataset import ClassLabel
from .evaluate import PrCurve

_CLASS_NAMES = [ClassLabel(c).token for c in range(3)]


def render_pr_curves(curves: list[PrCurve], path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    for curve in curves:
        if curve.empty:
            continue
        name = _CLASS_NAMES[curve.class_index]
        ax.plot(curve.recall, curve.precision, label=name)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_confusion_matrix(cm: np.ndarray, path, title: str = "") -> None:
    cm = np.asarray(cm)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.imshow(cm, cmap="Greens")
    ax.set_xticks(range(cm.shape[1]), _CLASS_NAMES[: cm.shape[1]])
    ax.set_yticks(range(cm.shape[0]), _CLASS_NAMES[: cm.shape[0]])
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, str(int(cm[i, j])), ha="center", va="center", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
