"""Losses returning (value, gradient w.r.t. the prediction)."""

from __future__ import annotations

import numpy as np


def mse_loss(pred, target):
    """Sum of squared errors averaged over the leading (sample) axis.

    For an (S, D) prediction this is (1/S) sum_s ||pred_s - target_s||^2; a
    scalar or 1-D input treats every entry as its own sample.
    """
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - np.asarray(target, dtype=np.float64)
    S = pred.shape[0] if pred.ndim >= 1 else 1
    return float(np.sum(diff**2) / S), 2.0 * diff / S


def bce_loss(pred, label, eps: float = 1e-7):
    """Mean binary cross-entropy with ``eps`` inside both logarithms."""
    p = np.asarray(pred, dtype=np.float64)
    b = np.asarray(label, dtype=np.float64)
    n = p.size
    value = -np.sum(b * np.log(p + eps) + (1.0 - b) * np.log(1.0 - p + eps)) / n
    grad = -(b / (p + eps) - (1.0 - b) / (1.0 - p + eps)) / n
    return float(value), grad
