import numpy as np
import pytest

from alignboost.align import ConstraintVector
from alignboost.data import Dataset, Feature, FeatureSchema, SyntheticSpec, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_feature_schema():
    return FeatureSchema(
        (
            Feature("sev", "ordinal", monotone_eligible=True),
            Feature("noise_0", "ordinal"),
        ),
        label_column="outcome",
    )


def make_dataset(X, y, schema=None, prefix="r"):
    X = np.asarray(X, dtype=float)
    if schema is None:
        feats = tuple(Feature(f"f{j}", "ordinal", monotone_eligible=True) for j in range(X.shape[1]))
        schema = FeatureSchema(feats, label_column="outcome")
    return Dataset(schema, X, np.asarray(y), tuple(f"{prefix}{i}" for i in range(X.shape[0])))


@pytest.fixture
def small_monotone_dataset():
    spec = SyntheticSpec(
        n=400,
        seed=7,
        monotone_features=(("sev", -1, 1.2),),
        noise_features=2,
        label_noise=0.1,
        levels=6,
    )
    return generate_synthetic(spec)


@pytest.fixture
def sev_constraints():
    return ConstraintVector({"sev": -1}, provenance="manual")
