"""Threshold-free performance metrics and cross-seed aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Z_95 = 1.96


class SingleClassError(ValueError):
    """Metric undefined because labels contain a single class."""


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equally long")
    return s, y.astype(np.int8)


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: fraction of positive/negative pairs ranked correctly,
    ties counting one half."""
    s, y = _check_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC-ROC needs both classes")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Step-wise AP over descending-score thresholds; equal scores form one step."""
    s, y = _check_scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise SingleClassError("average precision needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s_desc = s[order]
    y_desc = y[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j + 1 < n and s_desc[j + 1] == s_desc[i]:
            j += 1
        tp += int(y_desc[i : j + 1].sum())
        seen = j + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


@dataclass(frozen=True)
class MetricPoint:
    """Held-out test performance of one trained model."""

    train_size: int
    seed: int
    constrained: bool
    auc_roc: float
    avg_precision: float


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    mean: float
    ci_low: float
    ci_high: float
    n_seeds: int


def aggregate_curve(points: list[MetricPoint], metric: str) -> list[CurvePoint]:
    """Per-size mean with a normal-approximation 95% CI across seeds."""
    if metric not in ("auc_roc", "avg_precision"):
        raise ValueError(f"unknown metric {metric!r}")
    by_size: dict[int, list[float]] = {}
    for p in points:
        by_size.setdefault(p.train_size, []).append(getattr(p, metric))
    out = []
    for size in sorted(by_size):
        vals = np.asarray(by_size[size], dtype=np.float64)
        if vals.size < 2:
            raise ValueError(f"train size {size} has a single seed; CI undefined")
        mean = float(vals.mean())
        half = Z_95 * float(vals.std(ddof=1)) / float(np.sqrt(vals.size))
        out.append(CurvePoint(size, mean, mean - half, mean + half, int(vals.size)))
    return out


def aggregate_values(values_by_size: dict[int, list[float]]) -> list[CurvePoint]:
    """Same CI construction for arbitrary per-size value collections."""
    out = []
    for size in sorted(values_by_size):
        vals = np.asarray(values_by_size[size], dtype=np.float64)
        if vals.size < 2:
            raise ValueError(f"train size {size} has a single value; CI undefined")
        mean = float(vals.mean())
        half = Z_95 * float(vals.std(ddof=1)) / float(np.sqrt(vals.size))
        out.append(CurvePoint(size, mean, mean - half, mean + half, int(vals.size)))
    return out


def wilson_interval(successes: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return (float(center - half), float(center + half))
