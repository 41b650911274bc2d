"""Behavioral divergence between two models evaluated on a shared test set."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .explain import ShapMatrix
from .metrics import SingleClassError


def prediction_distance(pa, pb) -> float:
    """Mean absolute gap between the two predicted-probability vectors."""
    a = np.asarray(pa, dtype=np.float64)
    b = np.asarray(pb, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("probability vectors must be 1-D, non-empty and equally long")
    return float(np.mean(np.abs(a - b)))


def ranking_distance(pa, pb, labels) -> float:
    """Disagreement rate on the ordering of mixed-outcome row pairs.

    For each pair with different true labels, a model orders it by
    sign(p_i - p_j). Opposite nonzero signs count 1, exactly one zero counts
    one half, equal signs count 0.
    """
    a = np.asarray(pa, dtype=np.float64)
    b = np.asarray(pb, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int8)
    if not (a.shape == b.shape == y.shape) or a.ndim != 1:
        raise ValueError("inputs must be 1-D and equally long")
    pos = np.nonzero(y == 1)[0]
    neg = np.nonzero(y == 0)[0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClassError("ranking distance needs both outcome classes")
    total = 0.0
    block = 1024
    for start in range(0, pos.size, block):
        pi = pos[start : start + block]
        sa = np.sign(a[pi][:, None] - a[neg][None, :])
        sb = np.sign(b[pi][:, None] - b[neg][None, :])
        differs = sa != sb
        one_zero = (sa == 0) ^ (sb == 0)
        total += float(np.sum(np.where(differs, np.where(one_zero, 0.5, 1.0), 0.0)))
    return total / (pos.size * neg.size)


def shap_distance(SA: ShapMatrix, SB: ShapMatrix) -> float:
    """Mean per-row L1 gap between attribution matrices, baseline included."""
    return float(np.mean(per_row_shap_l1(SA, SB)))


def per_row_shap_l1(SA: ShapMatrix, SB: ShapMatrix) -> np.ndarray:
    if SA.columns != SB.columns:
        raise ValueError("attribution matrices have different columns")
    if SA.row_ids != SB.row_ids:
        raise ValueError("attribution matrices cover different rows")
    return np.abs(SA.values - SB.values).sum(axis=1)


@dataclass(frozen=True)
class DistanceReport:
    """All three divergence measures plus the per-row vectors that downstream
    sampling draws from."""

    d_pred: float
    d_rank: float
    d_shap: float
    q: int
    per_row_abs_dp: tuple[float, ...]
    per_row_shap_l1: tuple[float, ...]
    row_ids: tuple[str, ...]
    model_a: str = ""
    model_b: str = ""

    def to_dict(self) -> dict:
        return {
            "d_pred": self.d_pred,
            "d_rank": self.d_rank,
            "d_shap": self.d_shap,
            "q": self.q,
            "per_row_abs_dp": list(self.per_row_abs_dp),
            "per_row_shap_l1": list(self.per_row_shap_l1),
            "row_ids": list(self.row_ids),
            "model_a": self.model_a,
            "model_b": self.model_b,
        }

    @staticmethod
    def from_dict(d: dict) -> "DistanceReport":
        return DistanceReport(
            d_pred=float(d["d_pred"]),
            d_rank=float(d["d_rank"]),
            d_shap=float(d["d_shap"]),
            q=int(d["q"]),
            per_row_abs_dp=tuple(d["per_row_abs_dp"]),
            per_row_shap_l1=tuple(d["per_row_shap_l1"]),
            row_ids=tuple(d["row_ids"]),
            model_a=d.get("model_a", ""),
            model_b=d.get("model_b", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "DistanceReport":
        return DistanceReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def distance_report(pa, pb, labels, SA: ShapMatrix, SB: ShapMatrix) -> DistanceReport:
    a = np.asarray(pa, dtype=np.float64)
    b = np.asarray(pb, dtype=np.float64)
    l1 = per_row_shap_l1(SA, SB)
    return DistanceReport(
        d_pred=prediction_distance(a, b),
        d_rank=ranking_distance(a, b, labels),
        d_shap=float(np.mean(l1)),
        q=a.size,
        per_row_abs_dp=tuple(np.abs(a - b).tolist()),
        per_row_shap_l1=tuple(l1.tolist()),
        row_ids=SA.row_ids,
        model_a=SA.model_fingerprint,
        model_b=SB.model_fingerprint,
    )
