"""Minibatch training with a stepped learning-rate schedule.

The learning rate starts at config.lr and is divided by 10 when the epoch
counter (1-indexed) reaches ceil(0.5 * epochs) and again at
ceil(0.7 * epochs). Validation windows are carved out of the training set
by trace, so no flow contributes to both sides, and the parameters from
the best validation epoch are restored at the end.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    lr: float = 1e-4
    val_fraction: float = 0.15
    seed: int = 0
    log_every: int = 0
    verbose: bool = False

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class TrainResult:
    history: dict = field(default_factory=dict)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    wall_seconds: float = 0.0


def lr_at_epoch(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Learning rate for a 1-indexed epoch under the /10, /10 step schedule."""
    lr = base_lr
    if epoch >= math.ceil(0.5 * total_epochs):
        lr *= 0.1
    if epoch >= math.ceil(0.7 * total_epochs):
        lr *= 0.1
    return lr


def split_validation(trace_ids: np.ndarray, labels: np.ndarray, fraction: float,
                     rng: np.random.Generator):
    """Pick whole traces for validation, stratified by label.

    Returns boolean masks (train_mask, val_mask) over windows. With a
    fraction of zero the validation mask is empty.
    """
    trace_ids = np.asarray(trace_ids)
    labels = np.asarray(labels)
    val_traces = []
    if fraction > 0.0:
        for cls in np.unique(labels):
            traces = np.unique(trace_ids[labels == cls])
            if traces.size < 2:
                continue
            n_val = max(1, int(round(fraction * traces.size)))
            n_val = min(n_val, traces.size - 1)
            picked = rng.permutation(traces.size)[:n_val]
            val_traces.extend(traces[picked].tolist())
    val_mask = np.isin(trace_ids, np.array(val_traces, dtype=trace_ids.dtype))
    return ~val_mask, val_mask


def _accuracy(model, x: np.ndarray, y: np.ndarray, batch_size: int = 256):
    """Accuracy and mean loss without caching activations."""
    from .losses import cross_entropy

    if x.shape[0] == 0:
        return 0.0, 0.0
    correct = 0
    loss_sum = 0.0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start:start + batch_size]
        yb = y[start:start + batch_size]
        logits = model.forward(xb, train=False)
        loss, _ = cross_entropy(logits, yb)
        loss_sum += loss * xb.shape[0]
        correct += int((logits.argmax(axis=1) == yb).sum())
    return correct / x.shape[0], loss_sum / x.shape[0]


def predict(model, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Predicted class index per window."""
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        logits = model.forward(x[start:start + batch_size], train=False)
        out[start:start + batch_size] = logits.argmax(axis=1)
    return out


def train_model(model, x: np.ndarray, y: np.ndarray, trace_ids: np.ndarray,
                config: TrainConfig) -> TrainResult:
    """Fit the model in place and restore the best validation epoch."""
    from .adam import Adam
    from .losses import cross_entropy

    config.validate()
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(4,)))
    train_mask, val_mask = split_validation(trace_ids, y, config.val_fraction, rng)
    x_tr, y_tr = x[train_mask], y[train_mask]
    x_val, y_val = x[val_mask], y[val_mask]
    if x_tr.shape[0] == 0:
        raise ValueError("no training windows left after the validation split")

    opt = Adam(model.params(), lr=config.lr)
    history = {"epoch": [], "lr": [], "train_loss": [], "train_accuracy": [],
               "val_loss": [], "val_accuracy": []}
    best = {"epoch": 0, "acc": -1.0, "params": None}
    n = x_tr.shape[0]
    started = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        opt.lr = lr_at_epoch(config.lr, epoch, config.epochs)
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = x_tr[idx]
            yb = y_tr[idx]
            logits = model.forward(xb, train=True)
            loss, dlogits = cross_entropy(logits, yb)
            model.backward(dlogits)
            opt.step(model.grads())
            loss_sum += loss * xb.shape[0]
            correct += int((logits.argmax(axis=1) == yb).sum())
        train_loss = loss_sum / n
        train_acc = correct / n
        if x_val.shape[0] > 0:
            val_acc, val_loss = _accuracy(model, x_val, y_val)
        else:
            val_acc, val_loss = train_acc, train_loss
        history["epoch"].append(epoch)
        history["lr"].append(opt.lr)
        history["train_loss"].append(train_loss)
        history["train_accuracy"].append(train_acc)
        history["val_loss"].append(val_loss)
        history["val_accuracy"].append(val_acc)
        if val_acc > best["acc"]:
            best = {"epoch": epoch, "acc": val_acc,
                    "params": {k: v.copy() for k, v in model.params().items()}}
        if config.verbose and (config.log_every and epoch % config.log_every == 0
                               or epoch == config.epochs):
            print(f"epoch {epoch:3d}  lr {opt.lr:.1e}  "
                  f"loss {train_loss:.4f}  acc {train_acc:.3f}  "
                  f"val_loss {val_loss:.4f}  val_acc {val_acc:.3f}", flush=True)

    if best["params"] is not None:
        live = model.params()
        for name, saved in best["params"].items():
            live[name][...] = saved
    return TrainResult(
        history=history,
        best_epoch=best["epoch"],
        best_val_accuracy=best["acc"],
        wall_seconds=time.perf_counter() - started,
    )
