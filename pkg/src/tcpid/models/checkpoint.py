"""Model checkpoints in the shared binary container format.

A checkpoint stores every parameter tensor plus the architecture
description and, optionally, the preprocessing context (channel names,
normalization statistics) needed to classify raw feature series later.
"""
from __future__ import annotations

import numpy as np

from ..container import load_arrays, save_arrays
from .network import build_model


def save_checkpoint(path, model, norm_mean=None, norm_std=None,
                    channels=None, label_names=None, extra_meta=None) -> None:
    # np.ascontiguousarray would promote 0-d params (the PRelu slopes) to 1-d;
    # the container handles contiguity itself.
    arrays = {f"param/{name}": np.asarray(arr)
              for name, arr in model.params().items()}
    meta = {"model": model.config()}
    if norm_mean is not None:
        arrays["norm_mean"] = np.asarray(norm_mean, dtype=np.float64)
        arrays["norm_std"] = np.asarray(norm_std, dtype=np.float64)
    if channels is not None:
        meta["channels"] = list(channels)
    if label_names is not None:
        meta["label_names"] = list(label_names)
    if extra_meta:
        meta.update(extra_meta)
    save_arrays(path, arrays, meta=meta)


def load_checkpoint(path, dtype=np.float32):
    """Rebuild the model and return (model, meta, extras).

    extras carries the normalization arrays when the checkpoint has them.
    """
    arrays, meta = load_arrays(path)
    model = build_model(meta["model"], seed=0, dtype=dtype)
    live = model.params()
    for name, arr in live.items():
        key = f"param/{name}"
        if key not in arrays:
            raise ValueError(f"checkpoint is missing parameter {name!r}")
        saved = arrays[key]
        if saved.shape != arr.shape:
            raise ValueError(
                f"parameter {name!r} has shape {saved.shape}, expected {arr.shape}")
        arr[...] = saved.astype(arr.dtype)
    extras = {}
    if "norm_mean" in arrays:
        extras["norm_mean"] = arrays["norm_mean"]
        extras["norm_std"] = arrays["norm_std"]
    return model, meta, extras
