"""Headless figure rendering for evaluation reports and training logs."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport


def render_bucket_figure(report: EvalReport, path: str | Path) -> Path:
    """Grouped P/R/F1 bars per distance bucket, example counts on the axis labels."""
    path = Path(path)
    labels = [f"{row.label}\n(n={row.score.n})" for row in report.buckets]
    x = range(len(report.buckets))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar([i - width for i in x], [r.score.precision for r in report.buckets], width, label="precision")
    ax.bar(list(x), [r.score.recall for r in report.buckets], width, label="recall")
    ax.bar([i + width for i in x], [r.score.f1 for r in report.buckets], width, label="F1")
    ax.axhline(report.overall.f1, color="gray", linestyle="--", linewidth=1, label="overall F1")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel(f"entity distance ({report.distance_metric} metric)")
    ax.set_ylabel("score")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_training_curves(log_path: str | Path, path: str | Path) -> Path:
    """Mean loss and dev F1 per epoch from a JSON-lines training log."""
    path = Path(path)
    epochs, losses, f1s = [], [], []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            epochs.append(row["epoch"])
            losses.append(row["mean_loss"])
            f1s.append(row["dev_f1"])
    fig, ax_loss = plt.subplots(figsize=(6.4, 4.0))
    ax_loss.plot(epochs, losses, color="tab:red", marker="o", markersize=3, label="mean loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean loss", color="tab:red")
    ax_f1 = ax_loss.twinx()
    ax_f1.plot(epochs, f1s, color="tab:blue", marker="s", markersize=3, label="dev F1")
    ax_f1.set_ylabel("dev F1", color="tab:blue")
    ax_f1.set_ylim(0.0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
