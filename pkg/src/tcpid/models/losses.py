"""Softmax cross-entropy for integer class labels."""
from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy loss and its gradient w.r.t. the logits.

    Returns (loss, dlogits) where dlogits already includes the 1/batch
    factor, so it feeds straight into backward().
    """
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float((log_z - shifted[np.arange(n), labels]).mean())
    probs = softmax(logits)
    probs[np.arange(n), labels] -= 1.0
    dlogits = (probs / n).astype(logits.dtype)
    return loss, dlogits
