"""From feature series to model-ready window tensors.

Pipeline per flow: resample every channel onto a uniform grid, smooth with an
exponential moving average, cut fixed-length windows, then fold each window
into time steps for the recurrent model. Normalization statistics always come
from the training windows alone.
"""
from __future__ import annotations

import json

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy.signal import lfilter

from .container import load_arrays, save_arrays
from .features import FeatureSeries

GRID_INTERVAL = 0.005      # seconds between resampled points
EWMA_ALPHA = 0.3
WINDOW_SAMPLES = 3000      # grid points per window
TRAIN_STRIDE = 1500        # overlapping windows for training
TEST_STRIDE = 3000         # disjoint windows for evaluation
TIME_STEPS = 20            # rows fed to the recurrent model per window
STD_FLOOR = 1e-8


def resample_linear(
    t: np.ndarray,
    x: np.ndarray,
    interval: float = GRID_INTERVAL,
    t0: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Linearly interpolate x(t) onto t0 + k*interval without extrapolating."""
    if t.shape[0] < 2:
        raise ValueError("need at least two samples to resample")
    if t0 is None:
        t0 = float(t[0])
    if t0 < t[0] or t0 > t[-1]:
        raise ValueError("grid origin outside the sampled range")
    n = int(np.floor((t[-1] - t0) / interval)) + 1
    grid = t0 + interval * np.arange(n)
    return grid, np.interp(grid, t, x)


def ewma(x: np.ndarray, alpha: float = EWMA_ALPHA) -> np.ndarray:
    """First-order exponential smoothing with y[0] = x[0]."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        return x.copy()
    zi = np.expand_dims((1.0 - alpha) * x[..., 0], -1)
    y, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=zi)
    return y


def window_count(n_samples: int, window: int = WINDOW_SAMPLES, stride: int = TRAIN_STRIDE) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // stride + 1


def cut_windows(
    grid_values: np.ndarray,
    window: int = WINDOW_SAMPLES,
    stride: int = TRAIN_STRIDE,
) -> np.ndarray:
    """Slice (channels, n) smoothed series into (count, window, channels)."""
    d, n = grid_values.shape
    count = window_count(n, window, stride)
    out = np.empty((count, window, d), dtype=np.float64)
    for k in range(count):
        start = k * stride
        out[k] = grid_values[:, start:start + window].T
    return out


def fold_time_steps(windows: np.ndarray, steps: int = TIME_STEPS) -> np.ndarray:
    """Reshape (count, window, channels) to (count, steps, window//steps*channels).

    Row-major order, so each step row holds window//steps consecutive grid
    points with their channels interleaved.
    """
    count, window, d = windows.shape
    if window % steps:
        raise ValueError(f"window {window} not divisible by {steps} steps")
    return windows.reshape(count, steps, (window // steps) * d)


def preprocess_series(
    series: FeatureSeries,
    stride: int,
    interval: float = GRID_INTERVAL,
    alpha: float = EWMA_ALPHA,
    window: int = WINDOW_SAMPLES,
) -> np.ndarray:
    """Resample, smooth and window one flow; returns (count, window, channels)."""
    grid, first = resample_linear(series.t, series.values[0], interval)
    resampled = np.empty((series.values.shape[0], grid.shape[0]))
    resampled[0] = first
    for i in range(1, series.values.shape[0]):
        resampled[i] = np.interp(grid, series.t, series.values[i])
    smoothed = ewma(resampled, alpha)
    return cut_windows(smoothed, window, stride)


@dataclass
class WindowDataset:
    """Normalized train/test window tensors plus everything needed to reuse them.

    x_* are float32 of shape (count, steps, step_dim); y_* are class ids;
    trace_* give the source flow of every window so splits stay trace-level.
    norm_mean/norm_std are per-channel statistics from the training windows.
    """

    x_train: np.ndarray
    y_train: np.ndarray
    trace_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    trace_test: np.ndarray
    norm_mean: np.ndarray
    norm_std: np.ndarray
    channels: tuple[str, ...]
    label_names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def steps(self) -> int:
        return int(self.x_train.shape[1])

    @property
    def step_dim(self) -> int:
        return int(self.x_train.shape[2])

    def summary(self) -> dict:
        return {
            "train_windows": int(self.x_train.shape[0]),
            "test_windows": int(self.x_test.shape[0]),
            "steps": self.steps,
            "step_dim": self.step_dim,
            "channels": list(self.channels),
            "classes": list(self.label_names),
            "train_traces": int(np.unique(self.trace_train).size),
            "test_traces": int(np.unique(self.trace_test).size),
        }

    def save(self, path: str | Path) -> None:
        arrays = {
            "x_train": self.x_train,
            "y_train": self.y_train,
            "trace_train": self.trace_train,
            "x_test": self.x_test,
            "y_test": self.y_test,
            "trace_test": self.trace_test,
            "norm_mean": self.norm_mean,
            "norm_std": self.norm_std,
        }
        meta = dict(self.meta)
        meta.update({
            "kind": "window_dataset",
            "channels": list(self.channels),
            "label_names": list(self.label_names),
        })
        save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path: str | Path) -> "WindowDataset":
        arrays, meta = load_arrays(path)
        if meta.get("kind") != "window_dataset":
            raise ValueError(f"{path}: not a window dataset file")
        channels = tuple(meta.pop("channels"))
        label_names = tuple(meta.pop("label_names"))
        meta.pop("kind", None)
        return cls(
            x_train=arrays["x_train"],
            y_train=arrays["y_train"],
            trace_train=arrays["trace_train"],
            x_test=arrays["x_test"],
            y_test=arrays["y_test"],
            trace_test=arrays["trace_test"],
            norm_mean=arrays["norm_mean"],
            norm_std=arrays["norm_std"],
            channels=channels,
            label_names=label_names,
            meta=meta,
        )

    def drop_channels(self, keep: Sequence[str]) -> "WindowDataset":
        """Restrict both splits to a channel subset, preserving window identity."""
        keep = tuple(keep)
        missing = [c for c in keep if c not in self.channels]
        if missing:
            raise ValueError(f"unknown channels {missing}; have {self.channels}")
        idx = [self.channels.index(c) for c in keep]
        d = len(self.channels)

        def cut(x):
            count, steps, step_dim = x.shape
            per = step_dim // d
            folded = x.reshape(count, steps, per, d)[..., idx]
            return np.ascontiguousarray(folded.reshape(count, steps, per * len(idx)))

        meta = dict(self.meta)
        meta["parent_channels"] = list(self.channels)
        return WindowDataset(
            x_train=cut(self.x_train),
            y_train=self.y_train.copy(),
            trace_train=self.trace_train.copy(),
            x_test=cut(self.x_test),
            y_test=self.y_test.copy(),
            trace_test=self.trace_test.copy(),
            norm_mean=self.norm_mean[idx].copy(),
            norm_std=self.norm_std[idx].copy(),
            channels=keep,
            label_names=self.label_names,
            meta=meta,
        )


def split_traces(
    labels: Sequence[int],
    test_frac: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified trace-level split; returns (train_idx, test_idx).

    Every class contributes at least one test trace when it has two or more.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError(f"test_frac must be in (0, 1), got {test_frac}")
    labels = np.asarray(labels)
    rng = Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(2,))))
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * test_frac))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def build_dataset(
    series_list: Sequence[FeatureSeries],
    test_frac: float = 0.25,
    seed: int = 0,
    interval: float = GRID_INTERVAL,
    alpha: float = EWMA_ALPHA,
    window: int = WINDOW_SAMPLES,
    train_stride: int = TRAIN_STRIDE,
    test_stride: int = TEST_STRIDE,
    steps: int = TIME_STEPS,
    meta: Optional[dict] = None,
) -> WindowDataset:
    """Assemble a normalized dataset from per-flow feature series.

    Flows are split into train and test before windowing; training flows use
    the overlapping stride, test flows the disjoint one. Channel statistics
    come from the training windows only.
    """
    if not series_list:
        raise ValueError("no feature series given")
    channels = series_list[0].channels
    for s in series_list:
        if s.channels != channels:
            raise ValueError("all series must share the same channel set")
        if s.label is None:
            raise ValueError("every series needs a label to build a dataset")
    labels = [int(s.label) for s in series_list]
    train_idx, test_idx = split_traces(labels, test_frac, seed)

    def collect(indices, stride):
        xs, ys, tids = [], [], []
        for i in indices:
            w = preprocess_series(series_list[i], stride, interval, alpha, window)
            if w.shape[0] == 0:
                raise ValueError(
                    f"series {i} too short: {series_list[i].n_samples} samples "
                    f"yield no {window}-point window"
                )
            xs.append(w)
            ys.append(np.full(w.shape[0], labels[i], dtype=np.int64))
            tids.append(np.full(w.shape[0], i, dtype=np.int64))
        return np.concatenate(xs), np.concatenate(ys), np.concatenate(tids)

    xtr, ytr, ttr = collect(train_idx, train_stride)
    xte, yte, tte = collect(test_idx, test_stride)

    mean = xtr.reshape(-1, len(channels)).mean(axis=0)
    std = xtr.reshape(-1, len(channels)).std(axis=0)
    std = np.maximum(std, STD_FLOOR)
    xtr = (xtr - mean) / std
    xte = (xte - mean) / std

    from .ccsim.trace import ALL_ALGORITHMS  # label id order is the enum order

    label_names = tuple(a.label for a in ALL_ALGORITHMS)
    info = {
        "interval": interval,
        "alpha": alpha,
        "window": window,
        "train_stride": train_stride,
        "test_stride": test_stride,
        "steps": steps,
        "test_frac": test_frac,
        "split_seed": seed,
    }
    if meta:
        info.update(meta)
    return WindowDataset(
        x_train=fold_time_steps(xtr, steps).astype(np.float32),
        y_train=ytr,
        trace_train=ttr,
        x_test=fold_time_steps(xte, steps).astype(np.float32),
        y_test=yte,
        trace_test=tte,
        norm_mean=mean,
        norm_std=std,
        channels=channels,
        label_names=label_names,
        meta=info,
    )


def save_dataset_splits(dataset: WindowDataset, outdir: str | Path) -> dict:
    """Write train.bin, test.bin and stats.json; returns the paths.

    Each split file is self-contained: it carries the normalization
    statistics and channel names alongside its windows, so either half can
    be consumed alone. stats.json summarizes both for quick inspection.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    shared = dict(dataset.meta)
    shared.update({
        "kind": "window_split",
        "channels": list(dataset.channels),
        "label_names": list(dataset.label_names),
    })
    paths = {}
    for split in ("train", "test"):
        arrays = {
            "x": getattr(dataset, f"x_{split}"),
            "y": getattr(dataset, f"y_{split}"),
            "trace_id": getattr(dataset, f"trace_{split}"),
            "norm_mean": dataset.norm_mean,
            "norm_std": dataset.norm_std,
        }
        meta = dict(shared)
        meta["split"] = split
        path = outdir / f"{split}.bin"
        save_arrays(path, arrays, meta)
        paths[split] = path

    counts = {}
    for split in ("train", "test"):
        y = getattr(dataset, f"y_{split}")
        per_class = np.bincount(y, minlength=dataset.n_classes)
        counts[split] = {name: int(c) for name, c in zip(dataset.label_names, per_class)}
    stats = {
        "summary": dataset.summary(),
        "windows_per_class": counts,
        "norm_mean": dataset.norm_mean.tolist(),
        "norm_std": dataset.norm_std.tolist(),
        "meta": dataset.meta,
    }
    stats_path = outdir / "stats.json"
    with open(stats_path, "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["stats"] = stats_path
    return paths


def load_dataset_splits(outdir: str | Path) -> WindowDataset:
    """Rebuild a WindowDataset from train.bin and test.bin in one directory."""
    outdir = Path(outdir)
    halves = {}
    metas = {}
    for split in ("train", "test"):
        path = outdir / f"{split}.bin"
        if not path.exists():
            raise ValueError(f"{outdir}: missing {split}.bin")
        arrays, meta = load_arrays(path)
        if meta.get("kind") != "window_split" or meta.get("split") != split:
            raise ValueError(f"{path}: not a {split} window-split file")
        halves[split] = arrays
        metas[split] = meta
    for key in ("channels", "label_names"):
        if metas["train"][key] != metas["test"][key]:
            raise ValueError(f"{outdir}: train/test disagree on {key}")
    if not np.array_equal(halves["train"]["norm_mean"], halves["test"]["norm_mean"]):
        raise ValueError(f"{outdir}: train/test disagree on normalization")
    meta = {k: v for k, v in metas["train"].items()
            if k not in ("kind", "split", "channels", "label_names")}
    return WindowDataset(
        x_train=halves["train"]["x"],
        y_train=halves["train"]["y"],
        trace_train=halves["train"]["trace_id"],
        x_test=halves["test"]["x"],
        y_test=halves["test"]["y"],
        trace_test=halves["test"]["trace_id"],
        norm_mean=halves["train"]["norm_mean"],
        norm_std=halves["train"]["norm_std"],
        channels=tuple(metas["train"]["channels"]),
        label_names=tuple(metas["train"]["label_names"]),
        meta=meta,
    )
