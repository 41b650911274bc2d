"""Second-order boosting with logistic loss, monotone bounds, and CV grid search.

Trees are grown by exact greedy search: candidate thresholds are midpoints
between consecutive distinct values, split gain uses gradient/hessian sums
with L2 leaf regularization, and missing rows are routed to whichever side
scores better (the learned default direction).

Monotone enforcement uses midpoint bounding: every node carries a [lower,
upper] interval for leaf weights; a split on a feature constrained
non-decreasing is rejected unless the clipped left-child weight is <= the
right-child weight, and the children inherit bounds tightened to the midpoint
of the two tentative weights. Leaf weights are clipped to their node's
interval, which makes the ensemble's margin exactly monotone in every
constrained feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .._util import derive_seed
from ..align import ConstraintVector
from ..data import Dataset, column_directions, encode
from ..metrics import auc_roc
from .ensemble import Tree, TreeEnsemble, TrainParams, sigmoid

GAIN_EPS = 1e-12  # a split must beat the leaf score by more than float noise


class DegenerateFoldError(ValueError):
    """A CV fold ended up single-class, so validation AUC is undefined."""


@dataclass(frozen=True)
class HyperGrid:
    learning_rates: tuple[float, ...] = (0.1, 0.3)
    num_rounds: tuple[int, ...] = (50,)
    max_depths: tuple[int, ...] = (3,)
    folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "learning_rates", tuple(sorted(set(self.learning_rates))))
        object.__setattr__(self, "num_rounds", tuple(sorted(set(self.num_rounds))))
        object.__setattr__(self, "max_depths", tuple(sorted(set(self.max_depths))))
        if not (self.learning_rates and self.num_rounds and self.max_depths):
            raise ValueError("grid sets must be non-empty")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")

    def cells(self) -> list[tuple[float, int, int]]:
        return [
            (lr, r, d)
            for lr in self.learning_rates
            for r in self.num_rounds
            for d in self.max_depths
        ]

    def to_dict(self) -> dict:
        return {
            "learning_rates": list(self.learning_rates),
            "num_rounds": list(self.num_rounds),
            "max_depths": list(self.max_depths),
            "folds": self.folds,
        }

    @staticmethod
    def from_dict(d: dict) -> "HyperGrid":
        return HyperGrid(
            tuple(d["learning_rates"]), tuple(d["num_rounds"]), tuple(d["max_depths"]), int(d["folds"])
        )


#: The default production search space.
DEFAULT_GRID = HyperGrid((0.01, 0.1, 0.3, 0.5), (100, 300, 500), (2, 3, 5, 10), folds=5)


@dataclass
class BoostingState:
    """Mutable training state threaded through boosting rounds."""

    X: np.ndarray
    y: np.ndarray
    directions: np.ndarray
    params: TrainParams
    margins: np.ndarray
    trees: list[Tree] = field(default_factory=list)

    @staticmethod
    def init(X: np.ndarray, y: np.ndarray, directions: np.ndarray, params: TrainParams, base_score: float) -> "BoostingState":
        margins = np.full(X.shape[0], base_score, dtype=np.float64)
        return BoostingState(X, np.asarray(y, dtype=np.float64), directions, params, margins)


class _TreeBuilder:
    def __init__(self, X, g, h, directions, params: TrainParams):
        self.X = X
        self.g = g
        self.h = h
        self.directions = directions
        self.p = params
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.default_left: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.weight: list[float] = []
        self.cover: list[float] = []

    def _add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.default_left.append(0)
        self.left.append(-1)
        self.right.append(-1)
        self.weight.append(0.0)
        self.cover.append(0.0)
        return len(self.feature) - 1

    def build(self, rows: np.ndarray) -> Tree:
        self._grow(rows, depth=0, lo=-math.inf, hi=math.inf)
        return Tree(self.feature, self.threshold, self.default_left, self.left, self.right, self.weight, self.cover)

    def _grow(self, rows: np.ndarray, depth: int, lo: float, hi: float) -> int:
        p = self.p
        idx = self._add_node()
        self.cover[idx] = float(rows.size)
        g_sum = float(self.g[rows].sum())
        h_sum = float(self.h[rows].sum())
        w_node = float(np.clip(-g_sum / (h_sum + p.reg_lambda), lo, hi))
        parent_score = -(g_sum * w_node + 0.5 * (h_sum + p.reg_lambda) * w_node * w_node)
        best = None
        if depth < p.max_depth and rows.size >= 2:
            kern = _kernels.active
            for j in range(self.X.shape[1]):
                col = self.X[rows, j]
                miss = np.isnan(col)
                vals = col[~miss]
                if vals.size < 2:
                    continue
                present = rows[~miss]
                order = np.argsort(vals, kind="stable")
                g_missing = float(self.g[rows[miss]].sum())
                h_missing = float(self.h[rows[miss]].sum())
                gain, thr, dleft, w_l, w_r = kern.scan_feature(
                    np.ascontiguousarray(vals[order]),
                    np.ascontiguousarray(self.g[present][order]),
                    np.ascontiguousarray(self.h[present][order]),
                    g_missing,
                    h_missing,
                    g_sum,
                    h_sum,
                    int(self.directions[j]),
                    lo,
                    hi,
                    p.reg_lambda,
                    p.gamma,
                    p.min_child_weight,
                    parent_score,
                )
                if best is None or gain > best[0]:
                    best = (gain, j, thr, dleft, w_l, w_r)
        if best is None or best[0] <= GAIN_EPS:
            self.weight[idx] = p.learning_rate * w_node
            return idx
        gain, j, thr, dleft, w_l, w_r = best
        col = self.X[rows, j]
        miss = np.isnan(col)
        with np.errstate(invalid="ignore"):
            go_left = np.where(miss, dleft, col < thr)
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        direction = int(self.directions[j])
        if direction == 0:
            bounds = ((lo, hi), (lo, hi))
        else:
            mid = (w_l + w_r) / 2.0
            bounds = ((lo, mid), (mid, hi)) if direction == 1 else ((mid, hi), (lo, mid))
        self.feature[idx] = j
        self.threshold[idx] = float(thr)
        self.default_left[idx] = 1 if dleft else 0
        self.left[idx] = self._grow(left_rows, depth + 1, *bounds[0])
        self.right[idx] = self._grow(right_rows, depth + 1, *bounds[1])
        return idx


def fit_boosting_round(state: BoostingState) -> Tree:
    """Grow one tree against the current margins and fold it into the state."""
    prob = sigmoid(state.margins)
    g = prob - state.y
    h = prob * (1.0 - prob)
    builder = _TreeBuilder(state.X, g, h, state.directions, state.params)
    tree = builder.build(np.arange(state.X.shape[0], dtype=np.intp))
    tree.margin_add(state.X, state.margins)
    state.trees.append(tree)
    return tree


def fit_ensemble(
    X: np.ndarray,
    y: np.ndarray,
    directions: np.ndarray,
    params: TrainParams,
    base_score: float,
    val_X: np.ndarray | None = None,
    round_checkpoints: tuple[int, ...] = (),
) -> tuple[list[Tree], dict[int, np.ndarray]]:
    """Boost for params.num_rounds; optionally record validation margins at checkpoints."""
    state = BoostingState.init(X, y, directions, params, base_score)
    val_margins = None if val_X is None else np.full(val_X.shape[0], base_score, dtype=np.float64)
    snapshots: dict[int, np.ndarray] = {}
    if 0 in round_checkpoints and val_margins is not None:
        snapshots[0] = val_margins.copy()
    for r in range(1, params.num_rounds + 1):
        tree = fit_boosting_round(state)
        if val_margins is not None:
            tree.margin_add(val_X, val_margins)
            if r in round_checkpoints:
                snapshots[r] = val_margins.copy()
    return state.trees, snapshots


def base_score_from_labels(y: np.ndarray) -> float:
    pos = float(np.sum(y))
    neg = float(y.size - pos)
    return math.log(pos / neg)


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Validation index sets: per-class round-robin after a seeded shuffle."""
    rng = np.random.default_rng(derive_seed("cv-folds", seed))
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        idx = np.nonzero(labels == cls)[0]
        shuffled = idx[rng.permutation(idx.size)]
        for i, row in enumerate(shuffled):
            folds[i % k].append(int(row))
    val_sets = [np.sort(np.asarray(f, dtype=np.intp)) for f in folds]
    for fi, val in enumerate(val_sets):
        fold_labels = labels[val]
        if val.size == 0 or fold_labels.min() == fold_labels.max():
            counts = {c: int((labels == c).sum()) for c in (0, 1)}
            raise DegenerateFoldError(
                f"fold {fi} is single-class with k={k} (class counts {counts}); "
                f"use fewer folds or more data"
            )
    return val_sets


@dataclass(frozen=True)
class CVCell:
    learning_rate: float
    num_rounds: int
    max_depth: int
    fold_aucs: tuple[float, ...]
    mean_auc: float
    fold_scores: tuple[np.ndarray, ...] = field(compare=False, repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "num_rounds": self.num_rounds,
            "max_depth": self.max_depth,
            "fold_aucs": list(self.fold_aucs),
            "mean_auc": self.mean_auc,
        }


@dataclass(frozen=True)
class CVReport:
    cells: tuple[CVCell, ...]
    best: TrainParams
    folds: tuple[np.ndarray, ...] = field(compare=False, repr=False, default=())
    fold_labels: tuple[np.ndarray, ...] = field(compare=False, repr=False, default=())
    skipped: bool = False

    def best_cell(self) -> CVCell | None:
        for c in self.cells:
            if (
                c.learning_rate == self.best.learning_rate
                and c.num_rounds == self.best.num_rounds
                and c.max_depth == self.best.max_depth
            ):
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "skipped": self.skipped,
            "best": self.best.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
        }


def cross_validate(
    X: np.ndarray,
    labels: np.ndarray,
    directions: np.ndarray,
    grid: HyperGrid,
    seed: int,
) -> CVReport:
    """Mean validation AUC per grid cell over shared stratified folds.

    Cells differing only in round count reuse one boosting pass per fold,
    which is exact because boosting is sequential and deterministic here.
    """
    val_sets = stratified_kfold(labels, grid.folds, seed)
    y = labels.astype(np.float64)
    checkpoints = tuple(grid.num_rounds)
    per_cell_scores: dict[tuple[float, int, int], list[np.ndarray]] = {
        cell: [] for cell in grid.cells()
    }
    fold_labels = []
    for val in val_sets:
        tr = np.setdiff1d(np.arange(labels.size, dtype=np.intp), val, assume_unique=True)
        base = base_score_from_labels(y[tr])
        fold_labels.append(labels[val])
        for lr in grid.learning_rates:
            for depth in grid.max_depths:
                params = TrainParams(learning_rate=lr, num_rounds=max(checkpoints), max_depth=depth)
                _, snaps = fit_ensemble(
                    X[tr], y[tr], directions, params, base, val_X=X[val], round_checkpoints=checkpoints
                )
                for r in checkpoints:
                    per_cell_scores[(lr, r, depth)].append(sigmoid(snaps[r]))
    cells = []
    for lr, r, depth in grid.cells():
        scores = per_cell_scores[(lr, r, depth)]
        aucs = tuple(auc_roc(s, fl) for s, fl in zip(scores, fold_labels))
        cells.append(
            CVCell(lr, r, depth, aucs, float(np.mean(aucs)), fold_scores=tuple(scores))
        )
    ranked = sorted(cells, key=lambda c: (-c.mean_auc, c.learning_rate, c.num_rounds, c.max_depth))
    best = ranked[0]
    return CVReport(
        cells=tuple(cells),
        best=TrainParams(learning_rate=best.learning_rate, num_rounds=best.num_rounds, max_depth=best.max_depth),
        folds=tuple(val_sets),
        fold_labels=tuple(fold_labels),
    )


def train(
    train_ds: Dataset,
    constraints: ConstraintVector,
    grid: HyperGrid,
    seed: int,
) -> TreeEnsemble:
    """Grid-search with stratified CV (best mean AUC, ties to the smaller
    learning rate, then fewer rounds, then shallower trees), then retrain on
    the full train set with the winning cell. A single-cell grid skips the
    search and fits directly."""
    train_ds.check_both_classes()
    constraints.validate_against(train_ds.schema)
    enc = encode(train_ds)
    directions = column_directions(train_ds.schema, constraints.directions)
    y = train_ds.labels.astype(np.float64)
    cells = grid.cells()
    if len(cells) == 1:
        lr, r, depth = cells[0]
        best = TrainParams(learning_rate=lr, num_rounds=r, max_depth=depth)
        report = CVReport(cells=(), best=best, skipped=True)
    else:
        report = cross_validate(enc.X, train_ds.labels, directions, grid, seed)
        best = report.best
    base = base_score_from_labels(y)
    trees, _ = fit_ensemble(enc.X, y, directions, best, base)
    return TreeEnsemble(
        trees=tuple(trees),
        learning_rate=best.learning_rate,
        base_score=base,
        constraints=constraints,
        schema=train_ds.schema,
        params=best,
        seed=seed,
        cv=report,
    )
