"""Boosted tree ensemble: structure, prediction, versioned JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .._util import sha256_hex
from ..data import Dataset, FeatureSchema, SchemaError, encode, encoded_layout
from ..align import ConstraintVector

FORMAT_NAME = "alignboost-model"
FORMAT_VERSION = 1

MARGIN_CLIP = 36.0  # keeps logistic(margin) strictly inside (0, 1) in float64


class SchemaMismatchError(SchemaError):
    """Rows do not conform to the schema the model was trained on."""


def sigmoid(margin: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(margin, -MARGIN_CLIP, MARGIN_CLIP)))


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.3
    num_rounds: int = 50
    max_depth: int = 3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("regularization parameters must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "num_rounds": self.num_rounds,
            "max_depth": self.max_depth,
            "reg_lambda": self.reg_lambda,
            "gamma": self.gamma,
            "min_child_weight": self.min_child_weight,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainParams":
        return TrainParams(**d)


@dataclass(frozen=True)
class Tree:
    """One regression tree in flat-array form (preorder).

    ``feature[i] < 0`` marks a leaf; ``weight`` holds post-shrinkage leaf
    values; ``cover`` counts training rows through each node. Rows with the
    split feature below the threshold go left; missing rows follow
    ``default_left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    cover: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=np.int32))
        object.__setattr__(self, "threshold", np.asarray(self.threshold, dtype=np.float64))
        object.__setattr__(self, "default_left", np.asarray(self.default_left, dtype=np.uint8))
        object.__setattr__(self, "left", np.asarray(self.left, dtype=np.int32))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=np.int32))
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=np.float64))
        object.__setattr__(self, "cover", np.asarray(self.cover, dtype=np.float64))

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def default_child(self) -> np.ndarray:
        return np.where(self.default_left.astype(bool), self.left, self.right).astype(np.int32)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(int(self.left[node])), self.depth(int(self.right[node])))

    def expected_value(self) -> float:
        """Cover-weighted mean leaf weight (the tree's output under the
        training cover distribution)."""
        leaves = self.feature < 0
        return float(np.sum(self.weight[leaves] * self.cover[leaves]) / self.cover[0])

    def margin_add(self, X: np.ndarray, out: np.ndarray) -> None:
        _kernels.active.tree_margin_add(
            self.feature, self.threshold, self.default_left, self.left, self.right, self.weight, X, out
        )

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.weight[node]), "cover": float(self.cover[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "default_left": bool(self.default_left[node]),
            "cover": float(self.cover[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @staticmethod
    def from_nested(d: dict) -> "Tree":
        feature, threshold, default_left, left, right, weight, cover = [], [], [], [], [], [], []

        def walk(nd: dict) -> int:
            idx = len(feature)
            if "leaf" in nd:
                feature.append(-1)
                threshold.append(math.nan)
                default_left.append(0)
                left.append(-1)
                right.append(-1)
                weight.append(float(nd["leaf"]))
                cover.append(float(nd["cover"]))
                return idx
            feature.append(int(nd["feature"]))
            threshold.append(float(nd["threshold"]))
            default_left.append(1 if nd["default_left"] else 0)
            left.append(-1)
            right.append(-1)
            weight.append(0.0)
            cover.append(float(nd["cover"]))
            left[idx] = walk(nd["left"])
            right[idx] = walk(nd["right"])
            return idx

        walk(d)
        return Tree(feature, threshold, default_left, left, right, weight, cover)


@dataclass(frozen=True)
class TreeEnsemble:
    """Additive model over trees: margin = base_score + sum of leaf weights.

    Leaf weights are stored post-shrinkage, so prediction is a plain sum.
    ``constraints`` records the per-feature monotone directions the model was
    trained under; the schema fingerprint pins the expected input layout.
    """

    trees: tuple[Tree, ...]
    learning_rate: float
    base_score: float
    constraints: ConstraintVector
    schema: FeatureSchema
    params: TrainParams
    seed: int
    cv: object | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))

    @property
    def columns(self) -> tuple[str, ...]:
        return encoded_layout(self.schema)[0]

    def check_dataset(self, ds: Dataset) -> None:
        if ds.schema.fingerprint() != self.schema.fingerprint():
            raise SchemaMismatchError("dataset schema does not match the model's training schema")

    def margin_matrix(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            tree.margin_add(X, out)
        return out

    def predict_margin(self, rows: Dataset) -> np.ndarray:
        self.check_dataset(rows)
        return self.margin_matrix(encode(rows).X)

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.margin_matrix(X))

    def predict_proba(self, rows: Dataset) -> np.ndarray:
        return sigmoid(self.predict_margin(rows))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "constraints": self.constraints.to_dict(),
            "params": self.params.to_dict(),
            "seed": int(self.seed),
            "schema": self.schema.to_dict(),
            "schema_fingerprint": self.schema.fingerprint(),
            "columns": list(self.columns),
            "trees": [t.to_nested() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_dict(d: dict) -> "TreeEnsemble":
        if d.get("format") != FORMAT_NAME:
            raise ValueError(f"not a {FORMAT_NAME} file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        schema = FeatureSchema.from_dict(d["schema"])
        if d.get("schema_fingerprint") not in (None, schema.fingerprint()):
            raise ValueError("schema fingerprint mismatch in model file")
        return TreeEnsemble(
            trees=tuple(Tree.from_nested(t) for t in d["trees"]),
            learning_rate=float(d["learning_rate"]),
            base_score=float(d["base_score"]),
            constraints=ConstraintVector.from_dict(d["constraints"]),
            schema=schema,
            params=TrainParams.from_dict(d["params"]),
            seed=int(d["seed"]),
        )

    @staticmethod
    def from_json(text: str) -> "TreeEnsemble":
        return TreeEnsemble.from_dict(json.loads(text))

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "TreeEnsemble":
        from pathlib import Path

        return TreeEnsemble.from_json(Path(path).read_text(encoding="utf-8"))

    def fingerprint(self) -> str:
        return sha256_hex(self.to_json())
