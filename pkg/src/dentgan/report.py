"""Delimited outputs and the matplotlib figures rendered next to them."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .metrics import MetricsReport  # noqa: E402
from .trainer import TrainReport  # noqa: E402

LOSS_CSV_HEADER = "step,d_loss,g_adv,g_l1,g_total"


def write_losses_csv(report: TrainReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LOSS_CSV_HEADER + "\n")
        for r in report.steps:
            fh.write(f"{r.step},{r.d_loss:.17g},{r.g_adv:.17g},{r.g_l1:.17g},{r.g_total:.17g}\n")


def save_loss_figure(report: TrainReport, path):
    """Loss curves per step; total generator loss on its own axis."""
    steps = [r.step for r in report.steps]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(steps, [r.d_loss for r in report.steps], label="d_loss", lw=0.8)
    ax1.plot(steps, [r.g_adv for r in report.steps], label="g_adv", lw=0.8)
    ax1.set_ylabel("adversarial loss")
    ax1.legend(loc="upper right")
    ax2.plot(steps, [r.g_l1 for r in report.steps], label="g_l1", color="tab:green", lw=0.8)
    ax2.plot(steps, [r.g_total for r in report.steps], label="g_total", color="tab:red", lw=0.8)
    ax2.set_xlabel("step")
    ax2.set_ylabel("reconstruction / total")
    ax2.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(report: MetricsReport, path):
    """Grouped bars of the per-class macro metrics."""
    names = [row.name for row in report.rows]
    metrics = ("precision", "tpr", "tnr", "dice")
    x = np.arange(len(names))
    width = 0.2
    fig, ax = plt.subplots(figsize=(10, 4.5))
    for k, metric in enumerate(metrics):
        values = [getattr(row.macro, metric) for row in report.rows]
        heights = [v if v is not None else 0.0 for v in values]
        ax.bar(x + (k - 1.5) * width, heights, width, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(ncol=4, loc="upper center")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
