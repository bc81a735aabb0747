"""Figure rendering for the report paths.

Figures are written straight to files (Agg backend, no display) next to
the delimited outputs they visualize, so a run leaves both the numbers
and the pictures behind.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _grid(n):
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    return rows, cols


def save_trajectory_figure(dataset, trajectory, path):
    """Observed vs model-run expression curves, one panel per gene."""
    n = dataset.n_genes
    rows, cols = _grid(n)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows),
                             squeeze=False, sharex=True)
    t = dataset.time_points
    for i, name in enumerate(dataset.gene_names):
        ax = axes[i // cols][i % cols]
        ax.plot(t, dataset.values[i], "o-", ms=3, lw=1, label="observed")
        ax.plot(t[:trajectory.shape[1]], trajectory[i], "--", lw=1.5,
                label="model")
        ax.set_title(name, fontsize=9)
        ax.set_ylim(-0.05, 1.05)
    for j in range(n, rows * cols):
        axes[j // cols][j % cols].axis("off")
    axes[0][0].legend(fontsize=7)
    fig.supxlabel("time")
    fig.supylabel("normalized expression")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_loss_figure(loss_history, path):
    """Per-run objective curves on a log scale."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for r, losses in enumerate(loss_history):
        ax.plot(np.arange(len(losses)), losses, lw=1, label=f"run {r + 1}")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("SSE")
    ax.grid(True, alpha=0.3)
    if len(loss_history) <= 10:
        ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_report_figure(report, path, title=None):
    """Bar chart of the confusion-derived metrics (undefined bars omitted)."""
    from .evaluation import METRIC_NAMES
    labels, values = [], []
    for name in METRIC_NAMES:
        v = getattr(report, name)
        if v is not None:
            labels.append(name.replace("_", "-"))
            values.append(v)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, values, color="#4878a8")
    ax.bar_label(bars, fmt="%.2f", fontsize=8)
    ax.set_ylim(0, 1.12)
    ax.set_ylabel("score")
    if title:
        ax.set_title(title, fontsize=10)
    ax.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
