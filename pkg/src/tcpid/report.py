"""Evaluation reports: delimited tables, a JSON summary, and figures.

Figures render through the Agg backend so report generation works on
headless machines. All tables are plain CSV so they diff cleanly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402


def write_confusion_csv(path, confusion: np.ndarray, labels) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + list(labels))
        for row_label, row in zip(labels, np.asarray(confusion)):
            writer.writerow([row_label] + [int(v) for v in row])


def write_metrics_csv(path, metrics: dict, labels) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        for k, label in enumerate(labels):
            writer.writerow([
                label,
                f"{metrics['precision'][k]:.6f}",
                f"{metrics['recall'][k]:.6f}",
                f"{metrics['f1'][k]:.6f}",
                int(metrics["support"][k]),
            ])
        writer.writerow(["macro",
                         f"{metrics['macro_precision']:.6f}",
                         f"{metrics['macro_recall']:.6f}",
                         f"{metrics['macro_f1']:.6f}",
                         int(np.sum(metrics["support"]))])
        writer.writerow(["accuracy", f"{metrics['accuracy']:.6f}", "", "", ""])


def write_history_csv(path, history: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = ["epoch", "lr", "train_loss", "train_accuracy", "val_loss", "val_accuracy"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for i in range(len(history["epoch"])):
            writer.writerow([history[k][i] for k in keys])


def write_ablation_csv(path, results) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channels", "accuracy", "min_recall", "macro_f1"])
        for res in results:
            writer.writerow([
                "+".join(res.channels),
                f"{res.accuracy:.6f}",
                f"{res.recall.min():.6f}",
                f"{res.f1.mean():.6f}",
            ])


def metrics_to_json(metrics: dict) -> dict:
    """JSON-ready copy of an evaluate_model() result."""
    out = {}
    for key, value in metrics.items():
        if key == "predictions":
            continue
        if isinstance(value, np.ndarray):
            out[key] = value.tolist()
        else:
            out[key] = value
    return out


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def plot_confusion(path, confusion: np.ndarray, labels, title="Confusion matrix") -> None:
    confusion = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(6.4, 5.4))
    im = ax.imshow(confusion, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    threshold = confusion.max() / 2 if confusion.max() else 0.5
    for i in range(confusion.shape[0]):
        for j in range(confusion.shape[1]):
            color = "white" if confusion[i, j] > threshold else "black"
            ax.text(j, i, str(int(confusion[i, j])), ha="center", va="center",
                    color=color, fontsize=8)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_history(path, history: dict) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 3.8))
    epochs = history["epoch"]
    ax1.plot(epochs, history["train_loss"], label="train")
    ax1.plot(epochs, history["val_loss"], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax1.grid(alpha=0.3)
    ax2.plot(epochs, history["train_accuracy"], label="train")
    ax2.plot(epochs, history["val_accuracy"], label="validation")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0.0, 1.02)
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ablation(path, results) -> None:
    names = ["+".join(res.channels) for res in results]
    accs = [res.accuracy for res in results]
    fig, ax = plt.subplots(figsize=(max(6.4, 1.3 * len(names)), 4.2))
    bars = ax.bar(range(len(names)), accs, color="#4878a8")
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_ylabel("window accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    for bar, acc in zip(bars, accs):
        ax.text(bar.get_x() + bar.get_width() / 2, acc + 0.01, f"{acc:.3f}",
                ha="center", fontsize=8)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_evaluation_report(outdir, metrics: dict, labels, history: dict | None = None,
                            extra: dict | None = None) -> list:
    """Write tables, JSON summary and figures; returns the files created."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created = []

    write_confusion_csv(outdir / "confusion.csv", metrics["confusion"], labels)
    created.append(outdir / "confusion.csv")
    write_metrics_csv(outdir / "metrics.csv", metrics, labels)
    created.append(outdir / "metrics.csv")

    payload = {"metrics": metrics_to_json(metrics), "labels": list(labels)}
    if extra:
        payload.update(extra)
    write_json(outdir / "report.json", payload)
    created.append(outdir / "report.json")

    plot_confusion(outdir / "confusion.png", metrics["confusion"], labels)
    created.append(outdir / "confusion.png")
    if history is not None:
        write_history_csv(outdir / "history.csv", history)
        created.append(outdir / "history.csv")
        plot_history(outdir / "history.png", history)
        created.append(outdir / "history.png")
    return created


def write_ablation_report(outdir, results, labels) -> list:
    """Tables and figures for an ablation sweep; returns the files created."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created = []
    write_ablation_csv(outdir / "ablation.csv", results)
    created.append(outdir / "ablation.csv")
    payload = {
        "labels": list(labels),
        "runs": [
            {
                "channels": list(res.channels),
                "accuracy": res.accuracy,
                "confusion": np.asarray(res.confusion).tolist(),
                "recall": np.asarray(res.recall).tolist(),
                "f1": np.asarray(res.f1).tolist(),
                "train_seconds": res.train_seconds,
            }
            for res in results
        ],
    }
    write_json(outdir / "ablation.json", payload)
    created.append(outdir / "ablation.json")
    plot_ablation(outdir / "ablation.png", results)
    created.append(outdir / "ablation.png")
    for res in results:
        tag = "+".join(res.channels)
        plot_confusion(outdir / f"confusion_{tag}.png", res.confusion, labels,
                       title=f"Channels: {tag}")
        created.append(outdir / f"confusion_{tag}.png")
    return created
