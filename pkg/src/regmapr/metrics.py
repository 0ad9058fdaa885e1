"""Evaluation metrics, written directly on numpy arrays.

Correlations fail fast on degenerate input (zero variance, non-finite
values) instead of propagating nan into reports.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def _pair(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} values, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericalError("metric input contains non-finite values")
    return x, y


def accuracy(pred, gold) -> float:
    pred = np.asarray(pred).ravel()
    gold = np.asarray(gold).ravel()
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {gold.shape[0]}")
    if pred.shape[0] == 0:
        raise ValueError("accuracy of an empty prediction list is undefined")
    return float(np.mean(pred == gold))


def f1_binary(pred, gold) -> float:
    """F1 for the positive class (label 1); 0.0 when precision + recall = 0."""
    pred = np.asarray(pred, dtype=np.int64).ravel()
    gold = np.asarray(gold, dtype=np.int64).ravel()
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {gold.shape[0]}")
    if pred.shape[0] == 0:
        raise ValueError("F1 of an empty prediction list is undefined")
    bad = set(np.unique(pred)) | set(np.unique(gold))
    if not bad <= {0, 1}:
        raise ValueError(f"binary F1 expects labels in {{0, 1}}, saw {sorted(bad)}")
    tp = int(np.sum((pred == 1) & (gold == 1)))
    fp = int(np.sum((pred == 1) & (gold == 0)))
    fn = int(np.sum((pred == 0) & (gold == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def pearson(x, y) -> float:
    x, y = _pair(x, y, min_len=2)
    cx = x - x.mean()
    cy = y - y.mean()
    ssx = float(cx @ cx)
    ssy = float(cy @ cy)
    if ssx == 0.0 or ssy == 0.0:
        raise NumericalError("correlation undefined: an input has zero variance")
    return float((cx @ cy) / np.sqrt(ssx * ssy))


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their covered positions."""
    x = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.shape[0])
    i = 0
    n = x.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of the tie-averaged ranks."""
    x, y = _pair(x, y, min_len=2)
    return pearson(average_ranks(x), average_ranks(y))


def mse(pred, gold) -> float:
    pred, gold = _pair(pred, gold, min_len=1)
    d = pred - gold
    return float(np.mean(d * d))


def mse_metric(pred, gold, report_range: tuple[float, float] = (0.0, 1.0)) -> float:
    """Mean squared error after mapping unit-scale values onto report_range.

    With the default range this is the raw unit-scale MSE.
    """
    pred, gold = _pair(pred, gold, min_len=1)
    lo, hi = report_range
    if not lo < hi:
        raise ValueError(f"invalid report range [{lo}, {hi}]")
    for name, arr in (("predictions", pred), ("golds", gold)):
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError(f"{name} must lie in [0, 1] before rescaling")
    d = (pred - gold) * (hi - lo)
    return float(np.mean(d * d))
