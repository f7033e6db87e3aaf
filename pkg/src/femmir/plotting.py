"""Figures written next to the evaluation CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import RECALL_LEVELS  # noqa: E402


def plot_pr_curves(curves: dict[str, list[float]], path, title: str = "Precision-recall") -> None:
    """One interpolated curve per label, e.g. ``"image->all"``."""
    fig, ax = plt.subplots(figsize=(5, 4), dpi=120)
    for label in sorted(curves):
        ax.plot(RECALL_LEVELS, curves[label], marker="o", ms=3, lw=1.2, label=label)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    if curves:
        ax.legend(fontsize=7, loc="lower left")
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_map_bars(cells, path) -> None:
    rows = [c for c in cells if c.map is not None]
    fig, ax = plt.subplots(figsize=(6, 3.5), dpi=120)
    labels = [f"{c.query_modality}->{c.target_modality}" for c in rows]
    ax.bar(range(len(rows)), [c.map for c in rows], color="#4c72b0")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mAP")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
