"""Classification metrics and the channel-ablation driver.

Confusion matrices are indexed [true, predicted]. Precision, recall and
F1 are reported per class; a zero denominator yields 0.0 and sets the
matching undefined flag instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts with rows as true class and columns as predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same shape")
    if y_true.size and (y_true.min() < 0 or y_true.max() >= n_classes
                        or y_pred.min() < 0 or y_pred.max() >= n_classes):
        raise ValueError("labels out of range")
    flat = y_true * n_classes + y_pred
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


def prf1(confusion: np.ndarray) -> dict:
    """Per-class precision, recall, F1 and supports from a confusion matrix."""
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValueError("confusion matrix must be square")
    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.int64)
    pred_total = confusion.sum(axis=0).astype(np.float64)
    true_total = support.astype(np.float64)

    undef_p = pred_total == 0
    undef_r = true_total == 0
    precision = np.divide(tp, pred_total, out=np.zeros_like(tp), where=~undef_p)
    recall = np.divide(tp, true_total, out=np.zeros_like(tp), where=~undef_r)
    pr_sum = precision + recall
    undef_f = pr_sum == 0
    f1 = np.divide(2 * precision * recall, pr_sum,
                   out=np.zeros_like(tp), where=~undef_f)
    total = confusion.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "support": support,
        "accuracy": accuracy,
        "macro_precision": float(precision.mean()),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
        "undefined_precision": undef_p,
        "undefined_recall": undef_r,
        "undefined_f1": undef_f,
    }


def evaluate_model(model, x: np.ndarray, y: np.ndarray, n_classes: int) -> dict:
    """Predict on windows and return confusion plus derived metrics."""
    from .models.training import predict

    preds = predict(model, x)
    confusion = confusion_matrix(y, preds, n_classes)
    metrics = prf1(confusion)
    metrics["confusion"] = confusion
    metrics["predictions"] = preds
    return metrics


def majority_vote(preds: np.ndarray, group_ids: np.ndarray, n_classes: int):
    """Most common prediction per group; ties go to the lowest class index.

    Returns (unique_groups, voted_labels).
    """
    preds = np.asarray(preds, dtype=np.int64)
    group_ids = np.asarray(group_ids)
    groups = np.unique(group_ids)
    voted = np.empty(groups.size, dtype=np.int64)
    for k, g in enumerate(groups):
        counts = np.bincount(preds[group_ids == g], minlength=n_classes)
        voted[k] = int(counts.argmax())
    return groups, voted


@dataclass
class AblationResult:
    channels: tuple
    accuracy: float
    confusion: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    train_seconds: float = 0.0
    history: dict = field(default_factory=dict)


def run_ablation(dataset, subsets, train_config, lstm_units, dense_units,
                 model_seed: int = 0, verbose: bool = False) -> list:
    """Retrain the classifier on channel subsets of one dataset.

    Every run uses the same architecture sizes, initialization seed and
    training configuration, so accuracy differences come only from the
    channels kept. The full-channel case is requested as a subset equal
    to dataset.channels.
    """
    from .models.network import LstmClassifier
    from .models.training import train_model

    results = []
    for subset in subsets:
        sub = tuple(subset)
        ds = dataset if sub == tuple(dataset.channels) else dataset.drop_channels(sub)
        input_dim = ds.x_train.shape[2]
        model = LstmClassifier(input_dim, len(ds.label_names),
                               lstm_units=lstm_units, dense_units=dense_units,
                               seed=model_seed)
        if verbose:
            print(f"ablation channels={','.join(sub)} input_dim={input_dim}", flush=True)
        outcome = train_model(model, ds.x_train, ds.y_train, ds.trace_train,
                              train_config)
        metrics = evaluate_model(model, ds.x_test, ds.y_test, len(ds.label_names))
        results.append(AblationResult(
            channels=sub,
            accuracy=metrics["accuracy"],
            confusion=metrics["confusion"],
            recall=metrics["recall"],
            f1=metrics["f1"],
            train_seconds=outcome.wall_seconds,
            history=outcome.history,
        ))
        if verbose:
            print(f"  accuracy={metrics['accuracy']:.4f}", flush=True)
    return results
