"""Prediction error metrics."""

from __future__ import annotations

import numpy as np


def nmse(pred, truth):
    """Per-joint normalized mean squared error, in percent.

    Normalization is the mean square of the ground-truth signal, so a zero
    predictor scores exactly 100 %.
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if pred.shape != truth.shape:
        raise ValueError("prediction/truth shape mismatch")
    denom = np.mean(truth ** 2, axis=0)
    if np.any(denom <= 0):
        raise ValueError("ground truth has a zero-energy column")
    return 100.0 * np.mean((pred - truth) ** 2, axis=0) / denom


def scalar_nmse(pred, truth):
    return float(nmse(np.asarray(pred)[:, None], np.asarray(truth)[:, None])[0])


def global_mse(pred, truth):
    """Sum over joints of the per-joint mean squared error."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    return float(np.sum(np.mean((pred - truth) ** 2, axis=0)))


def quartiles(values):
    """(q25, median, q75) of a sequence; NaNs for empty input."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        return float("nan"), float("nan"), float("nan")
    return (float(np.quantile(arr, 0.25)),
            float(np.quantile(arr, 0.50)),
            float(np.quantile(arr, 0.75)))
