import math

import numpy as np
import pytest

from alignboost.align import ConstraintVector
from alignboost.data import Feature, FeatureSchema
from alignboost.explain import ShapMatrix, top_k_payload, tree_shap
from alignboost.gbt import HyperGrid, train

from .conftest import make_dataset
from .oracles import shapley_bruteforce, tree_value_given_coalition
from .test_gbt import SCHEMA_2F, leaf, manual_ensemble, split


def schema_ord(m):
    return FeatureSchema(tuple(Feature(f"f{j}", "ordinal") for j in range(m)), label_column="outcome")


class TestTreeShapBasics:
    def test_zero_trees_all_zero_baseline_is_prior(self):
        ds = make_dataset([[0.0, 1.0], [1.0, 0.0]], [0, 1], schema=SCHEMA_2F)
        model = manual_ensemble([], SCHEMA_2F, base_score=0.25)
        S = tree_shap(model, ds)
        np.testing.assert_array_equal(S.values[:, :-1], 0.0)
        np.testing.assert_array_equal(S.values[:, -1], 0.25)

    def test_depth_one_attribution_is_weight_minus_expectation(self):
        # split on f0: covers 3 left, 5 right -> E = (3*(-0.7) + 5*0.9) / 8
        tree = split(0, 0.5, leaf(-0.7, 3), leaf(0.9, 5))
        model = manual_ensemble([tree], SCHEMA_2F, base_score=0.0)
        ds = make_dataset([[0.0, 0.3], [1.0, 0.4]], [0, 1], schema=SCHEMA_2F)
        S = tree_shap(model, ds)
        expectation = (3 * -0.7 + 5 * 0.9) / 8
        assert S.values[0, 0] == pytest.approx(-0.7 - expectation, abs=1e-12)
        assert S.values[1, 0] == pytest.approx(0.9 - expectation, abs=1e-12)
        np.testing.assert_allclose(S.values[:, 1], 0.0, atol=1e-15)
        np.testing.assert_allclose(S.values[:, -1], expectation)

    def test_local_accuracy_on_trained_model(self, small_monotone_dataset, sev_constraints):
        model = train(
            small_monotone_dataset, sev_constraints, HyperGrid((0.3,), (25,), (3,), folds=2), seed=2
        )
        S = tree_shap(model, small_monotone_dataset)
        margins = model.predict_margin(small_monotone_dataset)
        np.testing.assert_allclose(S.totals(), margins, atol=1e-6)

    def test_additivity_across_trees(self, small_monotone_dataset, sev_constraints):
        model = train(
            small_monotone_dataset, sev_constraints, HyperGrid((0.3,), (8,), (3,), folds=2), seed=2
        )
        S_all = tree_shap(model, small_monotone_dataset)
        partial = np.zeros_like(S_all.values)
        for tree in model.trees:
            single = manual_ensemble(
                [tree.to_nested()], small_monotone_dataset.schema, base_score=0.0
            )
            contribution = tree_shap(single, small_monotone_dataset).values
            partial[:, :-1] += contribution[:, :-1]
            partial[:, -1] += contribution[:, -1]
        partial[:, -1] += model.base_score
        np.testing.assert_allclose(S_all.values, partial, atol=1e-9)


class TestCoalitionOracle:
    def assert_matches_oracle(self, tree_dicts, schema, rows_matrix):
        model = manual_ensemble(tree_dicts, schema, base_score=0.0)
        m = len(schema.features)
        labels = [0, 1] * (len(rows_matrix) // 2 + 1)
        ds = make_dataset(rows_matrix, labels[: len(rows_matrix)], schema=schema)
        S = tree_shap(model, ds)
        for r in range(len(rows_matrix)):
            expected = shapley_bruteforce(tree_dicts, np.asarray(rows_matrix[r], dtype=float), m)
            np.testing.assert_allclose(S.values[r, :-1], expected, atol=1e-9)
            base = tree_value_given_coalition(tree_dicts, rows_matrix[r], frozenset())
            assert S.values[r, -1] == pytest.approx(base, abs=1e-9)

    def test_depth_two_distinct_features(self):
        tree = split(
            0,
            0.5,
            split(1, 0.5, leaf(-1.0, 2), leaf(0.5, 3)),
            split(2, 1.5, leaf(0.2, 4), leaf(1.5, 1)),
        )
        rows = [[0.0, 0.0, 1.0], [1.0, 1.0, 2.0], [0.0, 1.0, 0.0], [1.0, 0.0, 2.0]]
        self.assert_matches_oracle([tree], schema_ord(3), rows)

    def test_repeated_feature_on_path(self):
        # f0 splits twice along one path; the unwinding logic must handle it
        tree = split(
            0,
            0.5,
            split(0, 0.25, leaf(-2.0, 2), leaf(-0.5, 2)),
            split(1, 0.5, leaf(0.5, 3), leaf(2.0, 1)),
        )
        rows = [[0.0, 0.0], [0.3, 1.0], [0.8, 0.0], [0.8, 1.0]]
        self.assert_matches_oracle([tree], schema_ord(2), rows)

    def test_missing_values_follow_default(self):
        tree = split(
            0,
            0.5,
            split(1, 0.5, leaf(-1.0, 2), leaf(0.5, 3)),
            leaf(1.0, 5),
            default_left=False,
        )
        rows = [[math.nan, 0.0], [0.0, math.nan], [math.nan, math.nan], [0.0, 1.0]]
        self.assert_matches_oracle([tree], schema_ord(2), rows)

    def test_multi_tree_ensemble(self):
        trees = [
            split(0, 0.5, leaf(-1.0, 4), leaf(1.0, 4)),
            split(1, 1.5, leaf(0.3, 5), leaf(-0.2, 3)),
            split(0, 1.5, split(1, 0.5, leaf(0.1, 2), leaf(0.4, 3)), leaf(-0.6, 3)),
        ]
        rows = [[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]]
        self.assert_matches_oracle(trees, schema_ord(2), rows)

    def test_trained_depth_two_fixture(self, rng):
        X = rng.integers(0, 4, size=(60, 4)).astype(float)
        y = (X[:, 0] + X[:, 1] + rng.normal(0, 1, 60) > 3).astype(int)
        y[:2] = [0, 1]
        ds = make_dataset(X, y, schema=schema_ord(4))
        model = train(ds, ConstraintVector.unconstrained(), HyperGrid((0.5,), (3,), (2,), folds=2), seed=1)
        tree_dicts = [t.to_nested() for t in model.trees]
        S = tree_shap(model, ds)
        for r in range(0, 60, 7):
            expected = shapley_bruteforce(tree_dicts, X[r], 4)
            np.testing.assert_allclose(S.values[r, :-1], expected, atol=1e-9)

    def test_symmetric_features_get_equal_attribution(self):
        # f0 and f1 play interchangeable roles; on the diagonal rows the
        # attribution must be identical
        tree = split(
            0,
            0.5,
            split(1, 0.5, leaf(0.0, 2), leaf(1.0, 2)),
            split(1, 0.5, leaf(1.0, 2), leaf(2.0, 2)),
        )
        model = manual_ensemble([tree], schema_ord(2), base_score=0.0)
        ds = make_dataset([[0.0, 0.0], [1.0, 1.0]], [0, 1], schema=schema_ord(2))
        S = tree_shap(model, ds)
        assert S.values[0, 0] == pytest.approx(S.values[0, 1], abs=1e-12)
        assert S.values[1, 0] == pytest.approx(S.values[1, 1], abs=1e-12)


class TestShapMatrix:
    def test_baseline_column_constant(self, small_monotone_dataset, sev_constraints):
        model = train(
            small_monotone_dataset, sev_constraints, HyperGrid((0.3,), (5,), (2,), folds=2), seed=2
        )
        S = tree_shap(model, small_monotone_dataset)
        assert np.ptp(S.values[:, -1]) == 0.0

    def test_csv_export(self, tmp_path):
        S = ShapMatrix(
            np.array([[0.5, -0.25, 1.0]]), ("f0", "f1", "baseline"), ("r0",), "fp"
        )
        S.to_csv(tmp_path / "s.csv")
        text = (tmp_path / "s.csv").read_text()
        assert text.splitlines()[0] == "row_id,f0,f1,baseline"
        assert text.splitlines()[1] == "r0,0.5,-0.25,1.0"


class TestTopKPayload:
    def make_matrices(self):
        cols = ("f0", "f1", "f2", "f3", "f4", "f5", "baseline")
        a = np.zeros((1, 7))
        a[0, 2] = 0.8
        a[0, -1] = 0.1
        b = np.zeros((1, 7))
        b[0, 2] = 0.8
        b[0, -1] = 0.1
        SA = ShapMatrix(a, cols, ("r0",), "ma")
        SB = ShapMatrix(b, cols, ("r0",), "mb")
        ds = make_dataset([[1, 2, 3, 4, 5, 6]], [1], schema=schema_ord(6))
        return SA, SB, ds

    def make_two_row_matrices(self):
        cols = ("f0", "f1", "f2", "f3", "f4", "f5", "baseline")
        a = np.zeros((2, 7))
        a[:, 2] = 0.8
        SA = ShapMatrix(a, cols, ("r0", "r1"), "ma")
        SB = ShapMatrix(a.copy(), cols, ("r0", "r1"), "mb")
        ds = make_dataset([[1, 2, 3, 4, 5, 6], [0, 0, 0, 0, 0, 0]], [1, 0], schema=schema_ord(6))
        return SA, SB, ds

    def test_single_nonzero_leads_rest_in_stable_order(self):
        SA, SB, ds = self.make_matrices()
        payload = top_k_payload(SA, SB, ds, "r0", k=5, side_seed=1)
        names = [e["column"] for e in payload.entries_a]
        assert names[0] == "f2"
        assert names[1:] == ["f0", "f1", "f3", "f4"]  # zero ties in column order
        assert payload.entries_a[0]["direction"] == 1
        assert payload.entries_a[1]["direction"] == 0

    def test_identical_models_identical_entries(self):
        SA, SB, ds = self.make_matrices()
        payload = top_k_payload(SA, SB, ds, "r0", k=5, side_seed=7)
        assert payload.entries_a == payload.entries_b

    def test_side_assignment_reproducible_and_varies(self):
        SA, SB, ds = self.make_two_row_matrices()
        first = top_k_payload(SA, SB, ds, "r0", k=5, side_seed=3)
        second = top_k_payload(SA, SB, ds, "r0", k=5, side_seed=3)
        assert first.left == second.left
        sides = {top_k_payload(SA, SB, ds, "r0", k=5, side_seed=s).left for s in range(24)}
        assert sides == {"A", "B"}

    def test_k_larger_than_features_rejected(self):
        SA, SB, ds = self.make_matrices()
        with pytest.raises(ValueError, match="exceeds"):
            top_k_payload(SA, SB, ds, "r0", k=7, side_seed=0)

    def test_display_values_from_original_space(self):
        SA, SB, ds = self.make_matrices()
        payload = top_k_payload(SA, SB, ds, "r0", k=5, side_seed=0)
        top = payload.entries_a[0]
        assert top["feature"] == "f2"
        assert top["value"] == 3.0
