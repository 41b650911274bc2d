"""Domain-knowledge alignment: survey elicitation, partial dependence, violations.

The elicitation survey asks, per feature, whether increasing it should always
raise, always lower, or have no required effect on the predicted outcome
probability. A strict per-feature majority becomes a monotone direction; the
resulting constraint vector feeds model training, and partial dependence
curves audit whether a trained model honors the expected shapes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .data import Dataset, FeatureSchema, ORDINAL, SchemaError, encode

if TYPE_CHECKING:  # pragma: no cover
    from .gbt import TreeEnsemble

ALWAYS_INCREASE = "always-increase"
ALWAYS_DECREASE = "always-decrease"
NEITHER = "neither"
_ANSWER_ALIASES = {
    ALWAYS_INCREASE: ALWAYS_INCREASE,
    ALWAYS_DECREASE: ALWAYS_DECREASE,
    NEITHER: NEITHER,
    "unsure": NEITHER,
    "neither/unsure": NEITHER,
}


@dataclass(frozen=True)
class SurveyResponse:
    respondent_id: str
    answers: dict[str, str]

    def __post_init__(self):
        canon = {}
        for feature, answer in self.answers.items():
            key = str(answer).strip().lower()
            if key not in _ANSWER_ALIASES:
                raise ValueError(f"respondent {self.respondent_id!r}: unknown answer {answer!r}")
            canon[feature] = _ANSWER_ALIASES[key]
        object.__setattr__(self, "answers", canon)


@dataclass(frozen=True)
class ConstraintVector:
    """Per-feature monotone direction: -1 non-increasing, 0 free, +1 non-decreasing."""

    directions: dict[str, int]
    provenance: str = "manual"

    def __post_init__(self):
        for name, d in self.directions.items():
            if d not in (-1, 0, 1):
                raise ValueError(f"direction for {name!r} must be -1, 0 or +1")

    def of(self, name: str) -> int:
        return self.directions.get(name, 0)

    def nonzero(self) -> dict[str, int]:
        return {k: v for k, v in self.directions.items() if v != 0}

    def validate_against(self, schema: FeatureSchema) -> None:
        names = set(schema.names)
        for name, d in self.directions.items():
            if name not in names:
                raise SchemaError(f"constraint references unknown feature {name!r}")
            if d != 0 and not schema.feature(name).monotone_eligible:
                raise SchemaError(f"feature {name!r} is not monotone-eligible")

    def to_dict(self) -> dict:
        return {"directions": dict(self.directions), "provenance": self.provenance}

    @staticmethod
    def from_dict(d: dict) -> "ConstraintVector":
        return ConstraintVector({k: int(v) for k, v in d["directions"].items()}, d.get("provenance", "manual"))

    @staticmethod
    def unconstrained() -> "ConstraintVector":
        return ConstraintVector({}, provenance="manual")

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "ConstraintVector":
        return ConstraintVector.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_survey(path) -> list[SurveyResponse]:
    """Read survey responses from CSV with columns respondent, feature, answer."""
    by_resp: dict[str, dict[str, str]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"respondent", "feature", "answer"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"survey CSV must have columns {sorted(required)}")
        for row in reader:
            by_resp.setdefault(row["respondent"].strip(), {})[row["feature"].strip()] = row["answer"]
    return [SurveyResponse(rid, answers) for rid, answers in sorted(by_resp.items())]


def derive_constraints(schema: FeatureSchema, responses: list[SurveyResponse]) -> ConstraintVector:
    """Strict-majority rule per feature; ties and pluralities give direction 0.

    Responses may cover different feature subsets; tallies are per feature over
    the respondents who answered it. Features with no majority stay
    unconstrained and are left for manual review.
    """
    if not responses:
        raise ValueError("need at least one survey response")
    eligible = set(schema.monotone_eligible_names())
    tallies: dict[str, dict[str, int]] = {}
    for resp in responses:
        for feature, answer in resp.answers.items():
            if feature not in set(schema.names):
                raise SchemaError(f"survey answer references unknown feature {feature!r}")
            if feature not in eligible:
                raise SchemaError(f"survey answer for non-monotone-eligible feature {feature!r}")
            t = tallies.setdefault(feature, {ALWAYS_INCREASE: 0, ALWAYS_DECREASE: 0, NEITHER: 0})
            t[resp.answers[feature]] += 1
    directions: dict[str, int] = {}
    for feature, t in tallies.items():
        total = sum(t.values())
        if t[ALWAYS_INCREASE] * 2 > total:
            directions[feature] = 1
        elif t[ALWAYS_DECREASE] * 2 > total:
            directions[feature] = -1
        else:
            directions[feature] = 0
    vec = ConstraintVector(directions, provenance="survey-majority")
    vec.validate_against(schema)
    return vec


# ---------------------------------------------------------------------------
# Partial dependence


@dataclass(frozen=True)
class PDPCurve:
    feature: str
    grid: tuple[float, ...]
    mean: tuple[float, ...]
    se: tuple[float, ...]
    n_test: int

    def __post_init__(self):
        g = tuple(float(v) for v in self.grid)
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "se", tuple(float(v) for v in self.se))

    def rows(self) -> list[tuple[str, float, float, float]]:
        return [(self.feature, v, m, s) for v, m, s in zip(self.grid, self.mean, self.se)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "grid": list(self.grid),
            "mean": list(self.mean),
            "se": list(self.se),
            "n_test": self.n_test,
            "ci_half_width": [2.0 * s for s in self.se],
        }


def pdp(model: "TreeEnsemble", test: Dataset, full: Dataset, feature: str) -> PDPCurve:
    """Univariate partial dependence of predicted probability on one feature.

    The value grid is the sorted unique non-missing values of the feature in
    the full dataset; for each grid value the feature is overwritten for every
    test row and the mean predicted probability and its standard error are
    recorded. Exactly ``len(grid) * len(test)`` predictions are evaluated; the
    test set itself is never mutated.
    """
    f = full.schema.feature(feature)
    if f.kind != ORDINAL:
        raise SchemaError(f"partial dependence needs an ordinal feature, got {feature!r}")
    col = full.column(feature)
    grid = np.unique(col[~np.isnan(col)])
    if grid.size == 0:
        raise ValueError(f"feature {feature!r} is entirely missing")
    enc = encode(test)
    if enc.schema_fingerprint != model.schema.fingerprint():
        raise SchemaError("test dataset schema does not match the model")
    j = enc.columns.index(feature)
    X = enc.X.copy()
    q = X.shape[0]
    means, ses = [], []
    for v in grid:
        X[:, j] = v
        p = model.predict_proba_matrix(X)
        means.append(float(p.mean()))
        ses.append(float(p.std(ddof=1) / math.sqrt(q)) if q > 1 else 0.0)
    return PDPCurve(feature, tuple(grid.tolist()), tuple(means), tuple(ses), q)


def ice_margins(model: "TreeEnsemble", rows: Dataset, feature: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-row margin curves over the feature's unique values in ``rows``.

    Returns (grid, margins) with margins shaped (len(grid), n_rows): row r's
    predicted margin when the feature is overwritten with each grid value.
    """
    f = rows.schema.feature(feature)
    if f.kind != ORDINAL:
        raise SchemaError(f"exhaustive scan needs an ordinal feature, got {feature!r}")
    col = rows.column(feature)
    grid = np.unique(col[~np.isnan(col)])
    if grid.size == 0:
        raise ValueError(f"feature {feature!r} is entirely missing")
    enc = encode(rows)
    if enc.schema_fingerprint != model.schema.fingerprint():
        raise SchemaError("dataset schema does not match the model")
    j = enc.columns.index(feature)
    X = enc.X.copy()
    margins = np.empty((grid.size, X.shape[0]))
    for gi, v in enumerate(grid):
        X[:, j] = v
        margins[gi] = model.margin_matrix(X)
    return grid, margins


def margin_monotonicity_violations(
    model: "TreeEnsemble", rows: Dataset, feature: str, direction: int, tolerance: float = 0.0
) -> int:
    """Exhaustive check of the trained-in guarantee: counts (row, consecutive
    grid value) pairs where the margin moves against the direction by more
    than ``tolerance``. Zero for any correctly constrained model."""
    if direction not in (-1, 1):
        raise ValueError("direction must be -1 or +1")
    _, margins = ice_margins(model, rows, feature)
    steps = direction * np.diff(margins, axis=0)
    return int((steps < -tolerance).sum())


def violations(
    curve: PDPCurve, direction: int, tolerance: float = 0.0
) -> list[tuple[tuple[int, int], float]]:
    """Consecutive grid pairs whose mean moves against the expected direction
    by more than ``tolerance``. The trained-in guarantee is exact, so any
    violation of a constrained feature at tolerance 0 indicates a defect."""
    if direction not in (-1, 1):
        raise ValueError("direction must be -1 or +1")
    out = []
    for i in range(len(curve.mean) - 1):
        step = curve.mean[i + 1] - curve.mean[i]
        against = -direction * step
        if against > tolerance:
            out.append(((i, i + 1), against))
    return out
