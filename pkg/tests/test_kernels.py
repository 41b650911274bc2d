"""Backend parity: the compiled kernels must reproduce the pure-Python ones."""

import math

import numpy as np
import pytest

from alignboost import _kernels
from alignboost.align import ConstraintVector
from alignboost.data import SyntheticSpec, generate_synthetic
from alignboost.explain import tree_shap
from alignboost.gbt import HyperGrid, train

compiled = pytest.mark.skipif(_kernels.compiled_backend is None, reason="compiled backend not built")


def random_scan_inputs(rng):
    n = int(rng.integers(2, 60))
    values = np.sort(rng.choice(np.arange(6, dtype=float), size=n))
    g = rng.normal(size=n)
    h = rng.random(n) * 0.25 + 1e-3
    g_miss = float(rng.normal()) if rng.random() < 0.5 else 0.0
    h_miss = float(rng.random()) if g_miss else 0.0
    g_total = float(np.sum(g)) + g_miss
    h_total = float(np.sum(h)) + h_miss
    direction = int(rng.choice([-1, 0, 1]))
    lo, hi = sorted(rng.normal(scale=2, size=2))
    if rng.random() < 0.5:
        lo, hi = -math.inf, math.inf
    parent = float(rng.normal())
    return (values, g, h, g_miss, h_miss, g_total, h_total, direction, lo, hi, 1.0, 0.0, 1.0, parent)


@compiled
class TestScanParity:
    def test_scan_feature_identical(self, rng):
        for _ in range(300):
            args = random_scan_inputs(rng)
            py = _kernels.python_backend.scan_feature(*args)
            cc = _kernels.compiled_backend.scan_feature(*args)
            assert py[0] == cc[0]  # gain, bitwise
            if math.isfinite(py[0]):
                assert py[1] == cc[1]
                assert bool(py[2]) == bool(cc[2])
                assert py[3] == cc[3] and py[4] == cc[4]


@compiled
class TestModelParity:
    @pytest.fixture()
    def dataset(self):
        spec = SyntheticSpec(
            n=500, seed=2, monotone_features=(("sev", -1, 1.0),), noise_features=2, label_noise=0.15
        )
        return generate_synthetic(spec)

    def train_with(self, backend, dataset, monkeypatch):
        monkeypatch.setattr(_kernels, "active", backend)
        return train(
            dataset, ConstraintVector({"sev": -1}), HyperGrid((0.3,), (20,), (3,), folds=3), seed=5
        )

    def test_trees_bit_identical(self, dataset, monkeypatch):
        a = self.train_with(_kernels.python_backend, dataset, monkeypatch)
        b = self.train_with(_kernels.compiled_backend, dataset, monkeypatch)
        assert a.to_json() == b.to_json()

    def test_margins_bit_identical(self, dataset, monkeypatch):
        model = self.train_with(_kernels.compiled_backend, dataset, monkeypatch)
        monkeypatch.setattr(_kernels, "active", _kernels.python_backend)
        via_python = model.predict_margin(dataset)
        monkeypatch.setattr(_kernels, "active", _kernels.compiled_backend)
        via_compiled = model.predict_margin(dataset)
        np.testing.assert_array_equal(via_python, via_compiled)

    def test_attributions_match_closely(self, dataset, monkeypatch):
        model = self.train_with(_kernels.compiled_backend, dataset, monkeypatch)
        monkeypatch.setattr(_kernels, "active", _kernels.python_backend)
        S_py = tree_shap(model, dataset)
        monkeypatch.setattr(_kernels, "active", _kernels.compiled_backend)
        S_cc = tree_shap(model, dataset)
        np.testing.assert_allclose(S_py.values, S_cc.values, atol=1e-12)
