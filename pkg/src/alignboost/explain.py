"""Exact per-row additive attributions for tree ensembles, plus UI payloads.

Attributions are computed in margin (log-odds) space, where tree ensembles
are exactly additive, using the polynomial-time weighted-path algorithm per
tree and summing across trees. The baseline column holds the cover-weighted
expected margin, so each row's attributions plus baseline reproduce its
predicted margin.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._util import derive_seed
from .data import Dataset, encode, encoded_layout
from .gbt import TreeEnsemble

BASELINE_COLUMN = "baseline"


@dataclass(frozen=True)
class ShapMatrix:
    """q x (m+1) attribution matrix: one column per encoded feature plus the
    constant baseline column (last)."""

    values: np.ndarray
    columns: tuple[str, ...]
    row_ids: tuple[str, ...]
    model_fingerprint: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.columns):
            raise ValueError("matrix shape does not match columns")
        if v.shape[0] != len(self.row_ids):
            raise ValueError("matrix rows do not match row_ids")
        if self.columns[-1] != BASELINE_COLUMN:
            raise ValueError("last column must be the baseline")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "row_ids", tuple(str(r) for r in self.row_ids))

    @property
    def baseline(self) -> float:
        return float(self.values[0, -1]) if self.values.shape[0] else 0.0

    def row(self, row_id: str) -> np.ndarray:
        return self.values[self.row_ids.index(row_id)]

    def totals(self) -> np.ndarray:
        """Per-row sum of all columns; equals the predicted margin."""
        return self.values.sum(axis=1)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row_id", *self.columns])
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid, *(repr(float(v)) for v in row)])


def tree_shap(model: TreeEnsemble, rows: Dataset) -> ShapMatrix:
    """Per-row attributions for every encoded feature column, margin space."""
    model.check_dataset(rows)
    enc = encode(rows)
    X = np.ascontiguousarray(enc.X)
    q, m = X.shape
    phi = np.zeros((q, m), dtype=np.float64)
    baseline = model.base_score
    kern = _kernels.active
    for tree in model.trees:
        kern.tree_shap_add(
            tree.feature,
            tree.threshold,
            tree.default_child(),
            tree.left,
            tree.right,
            tree.weight,
            tree.cover,
            X,
            phi,
        )
        baseline += tree.expected_value()
    values = np.hstack([phi, np.full((q, 1), baseline)])
    return ShapMatrix(values, (*enc.columns, BASELINE_COLUMN), rows.row_ids, model.fingerprint())


@dataclass(frozen=True)
class BarPlotPayload:
    """Top-k attribution entries for one row under two models, with the
    randomized left/right side assignment. Model A/B identity is carried by
    the caller, never by the entries themselves."""

    row_id: str
    entries_a: tuple[dict, ...]
    entries_b: tuple[dict, ...]
    left: str  # "A" or "B"

    def __post_init__(self):
        if self.left not in ("A", "B"):
            raise ValueError("left must be 'A' or 'B'")

    def left_entries(self) -> tuple[dict, ...]:
        return self.entries_a if self.left == "A" else self.entries_b

    def right_entries(self) -> tuple[dict, ...]:
        return self.entries_b if self.left == "A" else self.entries_a

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "entries_a": [dict(e) for e in self.entries_a],
            "entries_b": [dict(e) for e in self.entries_b],
            "left": self.left,
        }


def _top_entries(S: ShapMatrix, rows: Dataset, row_id: str, k: int) -> tuple[dict, ...]:
    layout_cols, feature_of, category_of = encoded_layout(rows.schema)
    if S.columns[:-1] != layout_cols:
        raise ValueError("attribution matrix columns do not match the dataset's encoded layout")
    r = rows.row_ids.index(row_id)
    atts = S.row(row_id)[:-1]
    ranked = sorted(range(len(layout_cols)), key=lambda j: (-abs(atts[j]), layout_cols[j]))
    entries = []
    for j in ranked[:k]:
        a = float(atts[j])
        entries.append(
            {
                "feature": feature_of[j],
                "column": layout_cols[j],
                "value": rows.display_value(feature_of[j], r),
                "attribution": a,
                "direction": 0 if a == 0 else (1 if a > 0 else -1),
            }
        )
    return tuple(entries)


def top_k_payload(
    SA: ShapMatrix,
    SB: ShapMatrix,
    rows: Dataset,
    row_id: str,
    k: int = 5,
    side_seed: int = 0,
) -> BarPlotPayload:
    """Entries sorted by |attribution| descending (zero ties in stable column
    order), and a fair-coin left/right assignment drawn from side_seed."""
    n_features = len(SA.columns) - 1
    if k > n_features:
        raise ValueError(f"k={k} exceeds the {n_features} feature columns")
    if SA.columns != SB.columns:
        raise ValueError("attribution matrices have different columns")
    if row_id not in SA.row_ids or row_id not in SB.row_ids:
        raise KeyError(f"row {row_id!r} missing from an attribution matrix")
    rng = np.random.default_rng(derive_seed("side", side_seed))
    left = "A" if rng.random() < 0.5 else "B"
    return BarPlotPayload(
        row_id=row_id,
        entries_a=_top_entries(SA, rows, row_id, k),
        entries_b=_top_entries(SB, rows, row_id, k),
        left=left,
    )
