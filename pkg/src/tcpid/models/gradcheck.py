"""Finite-difference verification of analytic gradients.

Runs the model in 64-bit, perturbs individual parameter entries with a
central difference, and compares against the gradient from backward().
"""
from __future__ import annotations

import numpy as np

from .losses import cross_entropy


def relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-12)
    return abs(analytic - numeric) / denom


def check_model_gradients(model, x: np.ndarray, y: np.ndarray,
                          entries_per_param: int = 4, eps: float = 1e-6,
                          seed: int = 0):
    """Compare analytic and numeric gradients on random parameter entries.

    Returns a list of (param_name, flat_index, analytic, numeric, rel_err)
    tuples, one per checked entry.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    logits = model.forward(x, train=True)
    _, dlogits = cross_entropy(logits, y)
    model.backward(dlogits)
    analytic = {k: v.copy() for k, v in model.grads().items()}
    params = model.params()
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def loss_now() -> float:
        out = model.forward(x, train=False)
        loss, _ = cross_entropy(out, y)
        return loss

    results = []
    for name, p in params.items():
        flat = p.reshape(-1)
        count = min(entries_per_param, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = loss_now()
            flat[idx] = orig - eps
            lo = loss_now()
            flat[idx] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[idx])
            results.append((name, int(idx), a, numeric, relative_error(a, numeric)))
    return results
