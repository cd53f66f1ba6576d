"""Figure rendering for the CLI report paths.

The library emits CSV only; these helpers turn harness results into PNG
files next to the CSVs.  Random one-at-a-time curves draw as a thick
black line, grids as colored lines, matching the convention used when
eyeballing convergence.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .collection import OccurrenceStats
from .harness import CurvePoint


def _style(label: str) -> dict:
    if label == "random_triplet":
        return {"color": "black", "linewidth": 2.5}
    return {"linewidth": 1.5}


def plot_curves(results: dict[tuple[str, int], list[CurvePoint]], out_path):
    """2x2 panel: both metrics against unique triplets and against screens."""
    labels = []
    for label, _ in results:
        if label not in labels:
            labels.append(label)
    fig, axes = plt.subplots(2, 2, figsize=(11, 7.5))
    panels = [
        ("triplets_unique", "loo_nn", "Unique triplets", "Leave-one-out NN error"),
        ("triplets_unique", "tge", "Unique triplets", "Triplet generalization error"),
        ("screens", "loo_nn", "Screens", "Leave-one-out NN error"),
        ("screens", "tge", "Screens", "Triplet generalization error"),
    ]
    for ax, (x_field, y_field, x_label, y_label) in zip(axes.flat, panels):
        for label in labels:
            curves = [curve for (lab, _), curve in results.items() if lab == label]
            if not curves:
                continue
            xs = np.mean([[getattr(p, x_field) for p in c] for c in curves], axis=0)
            ys = np.mean([[getattr(p, y_field) for p in c] for c in curves], axis=0)
            ax.plot(xs, ys, label=label, **_style(label))
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.grid(True, alpha=0.3)
    axes.flat[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_occurrence(grid: OccurrenceStats, random: OccurrenceStats, out_path):
    """Stacked histograms of per-object occurrence counts, grid vs. random."""
    fig, (ax_top, ax_bottom) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    lo = min(grid.histogram.min(), random.histogram.min())
    hi = max(grid.histogram.max(), random.histogram.max())
    bins = np.linspace(lo, hi + 1, 40)
    ax_top.hist(grid.histogram, bins=bins, color="tab:orange")
    ax_top.set_title(f"Grid answers: mean {grid.mean:.1f}, std {grid.std:.1f}")
    ax_bottom.hist(random.histogram, bins=bins, color="tab:blue")
    ax_bottom.set_title(f"Random answers: mean {random.mean:.1f}, std {random.std:.1f}")
    ax_bottom.set_xlabel("Occurrences of an object across all triplets")
    for ax in (ax_top, ax_bottom):
        ax.set_ylabel("Objects")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
