"""Render the training log and evaluation report into plot-ready CSV series
plus matplotlib figures written next to them."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import EvalReport


def read_training_log(log_path) -> list[dict]:
    records = []
    with Path(log_path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def render_training_log(log_path, out_dir) -> list[Path]:
    """loss_curve.csv with one row per epoch, plus loss_curve.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = read_training_log(log_path)
    if not records:
        raise ValueError(f"training log {log_path} holds no epochs")
    csv_path = out_dir / "loss_curve.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "e_step_seconds", "m_step_seconds"])
        for rec in records:
            writer.writerow(
                [
                    rec["epoch"],
                    rec["mean_loss"],
                    rec["e_step_seconds"],
                    rec["m_step_seconds"],
                ]
            )

    epochs = [rec["epoch"] for rec in records]
    losses = [rec["mean_loss"] for rec in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_title("Pretraining loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    png_path = out_dir / "loss_curve.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [csv_path, png_path]


def render_eval_report(report_path, out_dir) -> list[Path]:
    """confusion.csv / per_class_accuracy.csv plus a confusion heatmap."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = EvalReport.load_json(report_path)
    confusion_csv = report.save_confusion_csv(out_dir / "confusion.csv")

    per_class_csv = out_dir / "per_class_accuracy.csv"
    with per_class_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "accuracy"])
        for cls, acc in enumerate(report.per_class_accuracy):
            writer.writerow([cls, acc])

    k = report.confusion.shape[0]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(report.confusion, cmap="Blues")
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    ax.set_title(f"Confusion matrix (accuracy {report.accuracy:.3f})")
    ax.set_xticks(range(k))
    ax.set_yticks(range(k))
    threshold = report.confusion.max() / 2 if report.confusion.max() else 0.5
    for i in range(k):
        for j in range(k):
            count = int(report.confusion[i, j])
            ax.text(
                j,
                i,
                str(count),
                ha="center",
                va="center",
                color="white" if count > threshold else "black",
                fontsize=8,
            )
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    png_path = out_dir / "confusion.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [confusion_csv, per_class_csv, png_path]


def render(log_path=None, report_path=None, out_dir=".") -> list[Path]:
    if log_path is None and report_path is None:
        raise ValueError("nothing to render: pass a training log, a report, or both")
    written: list[Path] = []
    if log_path is not None:
        written.extend(render_training_log(log_path, out_dir))
    if report_path is not None:
        written.extend(render_eval_report(report_path, out_dir))
    return written

