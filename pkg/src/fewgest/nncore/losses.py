"""Losses paired with the models' softmax outputs."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError

PROB_EPS = 1e-12  # zero probabilities at the target class are clamped here


def one_hot(labels: np.ndarray, n_classes: int, dtype=np.float64) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def cross_entropy(probs: np.ndarray, targets: np.ndarray,
                  class_weights: np.ndarray | None = None):
    """Mean cross-entropy over a batch of softmax outputs.

    targets may be one-hot rows or an integer label vector. Returns
    (loss, grad) where grad is with respect to the PRE-softmax logits,
    (p - t)/batch, the fused form used with Sequential.backward(skip_last=True).
    Optional class_weights reweight rows by their target class; the loss
    and grad are then normalized by the summed weight instead of the batch.
    """
    if probs.ndim != 2:
        raise ShapeError(f"probs must be (n, k), got {probs.shape}")
    if targets.ndim == 1:
        targets = one_hot(targets.astype(np.int64), probs.shape[1], probs.dtype)
    if targets.shape != probs.shape:
        raise ShapeError(f"targets {targets.shape} vs probs {probs.shape}")
    row_sums = probs.sum(axis=1)
    if probs.size and np.max(np.abs(row_sums - 1.0)) > 1e-6:
        raise ShapeError("probs rows must sum to 1 (softmax output expected)")
    if class_weights is None:
        row_w = np.ones(probs.shape[0], dtype=probs.dtype)
    else:
        row_w = targets @ np.asarray(class_weights, dtype=probs.dtype)
    denom = row_w.sum()
    p_t = np.clip((probs * targets).sum(axis=1), PROB_EPS, None)
    loss = float((row_w * -np.log(p_t)).sum() / denom)
    grad = row_w[:, None] * (probs - targets) / denom
    return loss, grad


def mse(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements; grad is wrt pred."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff ** 2))
    return loss, 2.0 * diff / diff.size
