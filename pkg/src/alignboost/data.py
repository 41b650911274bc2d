"""Tabular binary-outcome datasets: typed schema, CSV loading, splits, synthesis.

A dataset keeps its original columns: ordinal features are stored as floats
(NaN for missing, never imputed) and categorical features as indices into the
feature's category list. Missing categorical cells map to a materialized
sentinel category ``"nan"``. One-hot expansion happens only at the model
boundary (see :func:`encode`).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._util import canonical_json, derive_seed, sha256_hex

logger = logging.getLogger(__name__)

ORDINAL = "ordinal"
CATEGORICAL = "categorical"
MISSING_CATEGORY = "nan"


class SchemaError(ValueError):
    """Schema definition or schema/data mismatch problem."""


class DataError(ValueError):
    """Malformed dataset content."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    values: tuple | None = None
    monotone_eligible: bool = False

    def __post_init__(self):
        if self.kind not in (ORDINAL, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.monotone_eligible and self.kind != ORDINAL:
            raise SchemaError(f"feature {self.name!r}: only ordinal features can be monotone-eligible")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(self.values))
            if self.kind == ORDINAL:
                vals = [float(v) for v in self.values]
                if any(b <= a for a, b in zip(vals, vals[1:])):
                    raise SchemaError(f"feature {self.name!r}: ordinal values must be strictly increasing")
            else:
                labels = [str(v) for v in self.values]
                if len(set(labels)) != len(labels):
                    raise SchemaError(f"feature {self.name!r}: duplicate categories")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    label_column: str = "label"
    id_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if self.label_column in names:
            raise SchemaError("label column collides with a feature name")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise SchemaError(f"unknown feature {name!r}")

    def feature(self, name: str) -> Feature:
        return self.features[self.index(name)]

    def monotone_eligible_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.monotone_eligible)

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind, "monotone_eligible": f.monotone_eligible}
            if f.values is not None:
                d["values"] = list(f.values)
            feats.append(d)
        out = {"label": self.label_column, "features": feats}
        if self.id_column is not None:
            out["id"] = self.id_column
        return out

    @staticmethod
    def from_dict(d: dict) -> "FeatureSchema":
        feats = tuple(
            Feature(
                name=f["name"],
                kind=f["kind"],
                values=tuple(f["values"]) if f.get("values") is not None else None,
                monotone_eligible=bool(f.get("monotone_eligible", False)),
            )
            for f in d.get("features", [])
        )
        return FeatureSchema(feats, label_column=d.get("label", "label"), id_column=d.get("id"))

    def save(self, path) -> None:
        Path(path).write_text(canonical_json(self.to_dict()) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "FeatureSchema":
        import json

        return FeatureSchema.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def fingerprint(self) -> str:
        """Hash of the feature layout only; id/label column naming does not
        change what a model consumes."""
        return sha256_hex(canonical_json(self.to_dict()["features"]))

    def with_id_column(self, name: str = "row_id") -> "FeatureSchema":
        return FeatureSchema(self.features, label_column=self.label_column, id_column=self.id_column or name)


@dataclass(frozen=True)
class Dataset:
    """Immutable rows + labels + ids bound to a schema.

    ``rows[i, j]`` holds feature j of row i in original space: the numeric
    value (or NaN) for ordinal features, the category index for categoricals.
    """

    schema: FeatureSchema
    rows: np.ndarray
    labels: np.ndarray
    row_ids: tuple[str, ...]
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        ids = tuple(str(r) for r in self.row_ids)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema.features):
            raise DataError("row matrix shape does not match schema")
        if not (rows.shape[0] == labels.shape[0] == len(ids)):
            raise DataError("rows, labels and row_ids must have equal length")
        if len(set(ids)) != len(ids):
            raise DataError("row_ids must be unique")
        bad = ~np.isin(labels, (0, 1))
        if bad.any():
            raise DataError(f"labels must be 0 or 1 (first bad index {int(np.nonzero(bad)[0][0])})")
        for j, f in enumerate(self.schema.features):
            if f.kind == CATEGORICAL:
                col = rows[:, j]
                ncat = len(f.values or ())
                if np.isnan(col).any():
                    raise DataError(f"categorical feature {f.name!r} has unmapped missing cells")
                if ((col < 0) | (col >= ncat) | (col != np.floor(col))).any():
                    raise DataError(f"categorical feature {f.name!r} has out-of-range category index")
        rows = rows.copy()
        rows.setflags(write=False)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def class_counts(self) -> dict[int, int]:
        return {1: int(self.labels.sum()), 0: int((self.labels == 0).sum())}

    def check_both_classes(self) -> "Dataset":
        counts = self.class_counts()
        if counts[0] == 0 or counts[1] == 0:
            raise DataError(f"dataset must contain both label classes (counts {counts})")
        return self

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.schema.index(name)]

    def take(self, indices, meta: dict | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            schema=self.schema,
            rows=self.rows[idx],
            labels=self.labels[idx],
            row_ids=tuple(self.row_ids[i] for i in idx),
            meta=meta or {},
        )

    def membership_fingerprint(self) -> str:
        """Hash of the sorted row-id set; equal iff two datasets hold the same rows."""
        return sha256_hex("\n".join(sorted(self.row_ids)))

    def categorical_label(self, feature_name: str, row_index: int) -> str:
        f = self.schema.feature(feature_name)
        if f.kind != CATEGORICAL:
            raise SchemaError(f"{feature_name!r} is not categorical")
        return str(f.values[int(self.rows[row_index, self.schema.index(feature_name)])])

    def display_value(self, feature_name: str, row_index: int):
        """Original-space value for UI display: category label, number, or None if missing."""
        j = self.schema.index(feature_name)
        f = self.schema.features[j]
        cell = self.rows[row_index, j]
        if f.kind == CATEGORICAL:
            return str(f.values[int(cell)])
        return None if math.isnan(cell) else float(cell)


# ---------------------------------------------------------------------------
# CSV loading


def load_dataset(path, schema: FeatureSchema) -> Dataset:
    """Read the documented CSV format (header row, empty string = missing).

    Categorical cells must match a declared category; missing cells are mapped
    to the sentinel category ``"nan"``, which is appended to the feature's
    category list if absent. Ordinal missing cells are stored as NaN, never
    imputed. Raises :class:`DataError` on unknown columns, unparseable cells,
    labels outside {0, 1}, or an empty file.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw_rows = list(reader)
    if not raw_rows:
        raise DataError(f"{path}: no data rows")

    expected = set(schema.names) | {schema.label_column}
    if schema.id_column:
        expected.add(schema.id_column)
    unknown = [c for c in header if c not in expected]
    if unknown:
        raise DataError(f"{path}: unknown column(s) {unknown}")
    missing_cols = sorted(expected - set(header))
    if missing_cols:
        raise DataError(f"{path}: missing column(s) {missing_cols}")
    col_of = {c: i for i, c in enumerate(header)}

    # Materialize category lists up front so cell encoding is single-pass.
    cats: dict[str, list[str]] = {}
    for f in schema.features:
        if f.kind != CATEGORICAL:
            continue
        if f.values is not None:
            cats[f.name] = [str(v) for v in f.values]
        else:
            seen: list[str] = []
            j = col_of[f.name]
            for raw in raw_rows:
                cell = raw[j].strip() if j < len(raw) else ""
                if cell and cell not in seen:
                    seen.append(cell)
            cats[f.name] = sorted(seen)
        column_cells = (r[col_of[f.name]].strip() if col_of[f.name] < len(r) else "" for r in raw_rows)
        if any(c == "" for c in column_cells) and MISSING_CATEGORY not in cats[f.name]:
            cats[f.name].append(MISSING_CATEGORY)

    features = tuple(
        replace(f, values=tuple(cats[f.name])) if f.kind == CATEGORICAL else f for f in schema.features
    )
    schema = FeatureSchema(features, label_column=schema.label_column, id_column=schema.id_column)

    n = len(raw_rows)
    rows = np.empty((n, len(features)), dtype=np.float64)
    labels = np.empty(n, dtype=np.int8)
    row_ids: list[str] = []
    ordinal_allowed = {
        f.name: {float(v) for v in f.values} for f in features if f.kind == ORDINAL and f.values is not None
    }
    for i, raw in enumerate(raw_rows):
        if len(raw) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(raw)} cells, expected {len(header)}")
        cell = raw[col_of[schema.label_column]].strip()
        try:
            lab = float(cell)
        except ValueError:
            raise DataError(f"{path}: row {i + 2}: unparseable label {cell!r}") from None
        if lab not in (0.0, 1.0):
            raise DataError(f"{path}: row {i + 2}: label must be 0 or 1, got {cell!r}")
        labels[i] = int(lab)
        row_ids.append(raw[col_of[schema.id_column]].strip() if schema.id_column else f"r{i}")
        for j, f in enumerate(features):
            cell = raw[col_of[f.name]].strip()
            if f.kind == ORDINAL:
                if cell == "":
                    rows[i, j] = np.nan
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: row {i + 2}: unparseable cell {cell!r} in {f.name!r}") from None
                if f.name in ordinal_allowed and v not in ordinal_allowed[f.name]:
                    raise DataError(f"{path}: row {i + 2}: value {cell!r} not among declared values of {f.name!r}")
                rows[i, j] = v
            else:
                label_txt = cell if cell else MISSING_CATEGORY
                try:
                    rows[i, j] = f.values.index(label_txt)
                except ValueError:
                    raise DataError(
                        f"{path}: row {i + 2}: unknown category {cell!r} for feature {f.name!r}"
                    ) from None
    return Dataset(schema, rows, labels, tuple(row_ids)).check_both_classes()


def save_dataset_csv(ds: Dataset, path) -> None:
    """Inverse of load_dataset for the same CSV conventions."""
    path = Path(path)
    id_col = ds.schema.id_column or "row_id"
    header = [id_col, *ds.schema.names, ds.schema.label_column]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ds.n_rows):
            out = [ds.row_ids[i]]
            for j, f in enumerate(ds.schema.features):
                cell = ds.rows[i, j]
                if f.kind == CATEGORICAL:
                    lab = str(f.values[int(cell)])
                    out.append("" if lab == MISSING_CATEGORY else lab)
                else:
                    out.append("" if math.isnan(cell) else format(cell, "g"))
            out.append(str(int(ds.labels[i])))
            w.writerow(out)


# ---------------------------------------------------------------------------
# Splitting and subsampling


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    seed: int
    stratify: bool = True

    def __post_init__(self):
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("test_fraction must be in (0, 1)")


def stratified_split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic train/test partition.

    Test size is ceil(test_fraction * n); per-class counts use floor plus
    largest-remainder so each class lands within one row of its exact share.
    """
    n = d.n_rows
    n_test = math.ceil(spec.test_fraction * n)
    if n_test == 0 or n_test == n:
        raise DataError("test_fraction produces an empty partition")
    rng = np.random.default_rng(spec.seed)
    if not spec.stratify:
        perm = rng.permutation(n)
        test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    else:
        class_idx = [np.nonzero(d.labels == c)[0] for c in (0, 1)]
        for c, idx in enumerate(class_idx):
            if idx.size < 2:
                raise DataError(f"class {c} has fewer than 2 rows; cannot stratify")
        exact = [spec.test_fraction * idx.size for idx in class_idx]
        counts = [int(math.floor(e)) for e in exact]
        remainders = [e - c for e, c in zip(exact, counts)]
        short = n_test - sum(counts)
        for c in sorted(range(2), key=lambda c: (-remainders[c], c))[: max(short, 0)]:
            counts[c] += 1
        for c, (idx, k) in enumerate(zip(class_idx, counts)):
            if k == 0 or k == idx.size:
                raise DataError(f"test_fraction leaves class {c} absent from one partition")
        test_parts, train_parts = [], []
        for idx, k in zip(class_idx, counts):
            perm = rng.permutation(idx.size)
            test_parts.append(idx[perm[:k]])
            train_parts.append(idx[perm[k:]])
        test_idx = np.sort(np.concatenate(test_parts))
        train_idx = np.sort(np.concatenate(train_parts))
    return (
        d.take(train_idx).check_both_classes(),
        d.take(test_idx).check_both_classes(),
    )


def subsample_train(train: Dataset, size: int, seed: int) -> Dataset:
    """Uniform subsample without replacement, deterministic per seed.

    If a draw lands single-class, the draw is retried with an internally
    incremented attempt counter; the adjustment is recorded in ``meta``.
    """
    if size < 2:
        raise ValueError("subsample size must be at least 2")
    if size > train.n_rows:
        raise ValueError(f"subsample size {size} exceeds train rows {train.n_rows}")
    attempt = 0
    while True:
        rng = np.random.default_rng(derive_seed("subsample", seed, attempt))
        idx = np.sort(rng.choice(train.n_rows, size=size, replace=False))
        sub = train.take(idx, meta={"subsample_seed": seed, "subsample_attempts": attempt})
        counts = sub.class_counts()
        if counts[0] > 0 and counts[1] > 0:
            if attempt:
                logger.warning("subsample seed=%d size=%d: %d single-class draws retried", seed, size, attempt)
            return sub
        attempt += 1
        if attempt > 1000:
            raise DataError("could not draw a subsample containing both classes")


# ---------------------------------------------------------------------------
# Synthetic generation


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator for desk-scale datasets with known monotone ground truth.

    Feature values are uniform integers in [0, levels). The label is drawn
    from a logistic model whose log-odds are
    ``intercept + sum_j direction_j * effect_j * (x_j - (levels - 1) / 2)``,
    so each declared feature is monotone in probability with its declared
    sign. ``label_noise`` flips exactly round(label_noise * n) labels, chosen
    uniformly. Noise features are drawn the same way but carry no effect.
    """

    n: int
    seed: int
    monotone_features: tuple[tuple[str, int, float], ...]
    noise_features: int = 0
    label_noise: float = 0.0
    levels: int = 8
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "monotone_features", tuple(tuple(m) for m in self.monotone_features))
        if self.n < 50:
            raise ValueError("synthetic datasets need n >= 50")
        if not (0.0 <= self.label_noise <= 1.0):
            raise ValueError("label_noise must be in [0, 1]")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        for name, direction, effect in self.monotone_features:
            if direction not in (-1, 1):
                raise ValueError(f"feature {name!r}: direction must be -1 or +1")
            if effect == 0:
                raise ValueError(f"feature {name!r}: effect_size 0 with a nonzero direction")

    def schema(self) -> FeatureSchema:
        feats = [
            Feature(name, ORDINAL, monotone_eligible=True) for name, _, _ in self.monotone_features
        ]
        feats += [Feature(f"noise_{i}", ORDINAL) for i in range(self.noise_features)]
        return FeatureSchema(tuple(feats), label_column="outcome")

    def true_directions(self) -> dict[str, int]:
        return {name: direction for name, direction, _ in self.monotone_features}


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    schema = spec.schema()
    p = len(schema.features)
    X = rng.integers(0, spec.levels, size=(spec.n, p)).astype(np.float64)
    mid = (spec.levels - 1) / 2.0
    logits = np.full(spec.n, spec.intercept, dtype=np.float64)
    for j, (_, direction, effect) in enumerate(spec.monotone_features):
        logits += direction * effect * (X[:, j] - mid)
    probs = 1.0 / (1.0 + np.exp(-logits))
    labels = (rng.random(spec.n) < probs).astype(np.int8)
    n_flip = int(round(spec.label_noise * spec.n))
    if n_flip:
        flip = rng.choice(spec.n, size=n_flip, replace=False)
        labels[flip] = 1 - labels[flip]
    ids = tuple(f"s{i}" for i in range(spec.n))
    return Dataset(schema, X, labels, ids, meta={"synthetic": True}).check_both_classes()


# ---------------------------------------------------------------------------
# One-hot expansion at the model boundary


@dataclass(frozen=True)
class EncodedMatrix:
    """Model-space view of a dataset: one column per ordinal feature, one per
    (categorical feature, category). Ordinal NaN is preserved."""

    X: np.ndarray
    columns: tuple[str, ...]
    feature_of: tuple[str, ...]
    category_of: tuple[str | None, ...]
    schema_fingerprint: str


def encoded_layout(schema: FeatureSchema) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str | None, ...]]:
    columns: list[str] = []
    feature_of: list[str] = []
    category_of: list[str | None] = []
    for f in schema.features:
        if f.kind == ORDINAL:
            columns.append(f.name)
            feature_of.append(f.name)
            category_of.append(None)
        else:
            for cat in f.values or ():
                columns.append(f"{f.name}={cat}")
                feature_of.append(f.name)
                category_of.append(str(cat))
    return tuple(columns), tuple(feature_of), tuple(category_of)


def encode(ds: Dataset) -> EncodedMatrix:
    columns, feature_of, category_of = encoded_layout(ds.schema)
    X = np.empty((ds.n_rows, len(columns)), dtype=np.float64)
    j = 0
    for fi, f in enumerate(ds.schema.features):
        col = ds.rows[:, fi]
        if f.kind == ORDINAL:
            X[:, j] = col
            j += 1
        else:
            for ci in range(len(f.values or ())):
                X[:, j] = (col == ci).astype(np.float64)
                j += 1
    return EncodedMatrix(X, columns, feature_of, category_of, ds.schema.fingerprint())


def decode_categoricals(enc: EncodedMatrix, schema: FeatureSchema) -> dict[str, list[str]]:
    """Recover original category labels from one-hot blocks (round-trip check)."""
    out: dict[str, list[str]] = {}
    for f in schema.features:
        if f.kind != CATEGORICAL:
            continue
        block_cols = [i for i, name in enumerate(enc.feature_of) if name == f.name]
        block = enc.X[:, block_cols]
        if not np.all(block.sum(axis=1) == 1.0):
            raise DataError(f"one-hot block for {f.name!r} is not exactly-one-hot")
        out[f.name] = [str(f.values[k]) for k in np.argmax(block, axis=1)]
    return out


def column_directions(schema: FeatureSchema, directions: dict[str, int]) -> np.ndarray:
    """Expand per-feature monotone directions to the encoded column layout."""
    _, feature_of, category_of = encoded_layout(schema)
    out = np.zeros(len(feature_of), dtype=np.int8)
    names = set(schema.names)
    for name, dirn in directions.items():
        if name not in names:
            raise SchemaError(f"constraint references unknown feature {name!r}")
        if dirn not in (-1, 0, 1):
            raise ValueError(f"direction for {name!r} must be -1, 0 or +1")
        if dirn != 0 and not schema.feature(name).monotone_eligible:
            raise SchemaError(f"feature {name!r} is not monotone-eligible")
    for i, (name, cat) in enumerate(zip(feature_of, category_of)):
        if cat is None:
            out[i] = directions.get(name, 0)
    return out
