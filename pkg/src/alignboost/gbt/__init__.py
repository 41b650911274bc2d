"""Gradient boosted tree classifiers with per-feature monotone constraints."""

from .ensemble import (
    MARGIN_CLIP,
    SchemaMismatchError,
    TrainParams,
    Tree,
    TreeEnsemble,
    sigmoid,
)
from .train import (
    DEFAULT_GRID,
    BoostingState,
    CVCell,
    CVReport,
    DegenerateFoldError,
    HyperGrid,
    base_score_from_labels,
    cross_validate,
    fit_boosting_round,
    fit_ensemble,
    stratified_kfold,
    train,
)

__all__ = [
    "MARGIN_CLIP",
    "SchemaMismatchError",
    "TrainParams",
    "Tree",
    "TreeEnsemble",
    "sigmoid",
    "DEFAULT_GRID",
    "BoostingState",
    "CVCell",
    "CVReport",
    "DegenerateFoldError",
    "HyperGrid",
    "base_score_from_labels",
    "cross_validate",
    "fit_boosting_round",
    "fit_ensemble",
    "stratified_kfold",
    "train",
]
