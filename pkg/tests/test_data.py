import math

import numpy as np
import pytest

from alignboost.data import (
    DataError,
    Dataset,
    Feature,
    FeatureSchema,
    MISSING_CATEGORY,
    SchemaError,
    SplitSpec,
    SyntheticSpec,
    decode_categoricals,
    encode,
    generate_synthetic,
    load_dataset,
    save_dataset_csv,
    stratified_split,
    subsample_train,
)
from alignboost.metrics import auc_roc

from .conftest import make_dataset


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


MIXED_SCHEMA = FeatureSchema(
    (
        Feature("stage", "ordinal", monotone_eligible=True),
        Feature("insurance", "categorical", values=("medicaid", "medicare", "private")),
    ),
    label_column="outcome",
)


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            FeatureSchema((Feature("a", "ordinal"), Feature("a", "ordinal")))

    def test_ordinal_values_must_increase(self):
        with pytest.raises(SchemaError):
            Feature("stage", "ordinal", values=(1, 3, 2))

    def test_monotone_eligible_requires_ordinal(self):
        with pytest.raises(SchemaError):
            Feature("insurance", "categorical", values=("a", "b"), monotone_eligible=True)

    def test_fingerprint_tracks_feature_layout_only(self):
        relabeled = FeatureSchema(MIXED_SCHEMA.features, label_column="different")
        reordered = FeatureSchema(MIXED_SCHEMA.features[::-1], label_column="outcome")
        assert MIXED_SCHEMA.fingerprint() == relabeled.fingerprint()
        assert MIXED_SCHEMA.fingerprint() != reordered.fingerprint()

    def test_roundtrip_via_dict(self):
        assert FeatureSchema.from_dict(MIXED_SCHEMA.to_dict()) == MIXED_SCHEMA


class TestLoadDataset:
    def test_direct_readback(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n1,private,1\n2,medicare,0\n3,private,1\n")
        ds = load_dataset(path, MIXED_SCHEMA)
        assert ds.n_rows == 3
        assert ds.class_counts() == {1: 2, 0: 1}
        assert list(ds.column("stage")) == [1.0, 2.0, 3.0]

    def test_missing_categorical_becomes_nan_category(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n1,,1\n2,medicare,0\n")
        ds = load_dataset(path, MIXED_SCHEMA)
        assert MISSING_CATEGORY in ds.schema.feature("insurance").values
        assert ds.categorical_label("insurance", 0) == MISSING_CATEGORY

    def test_missing_ordinal_stays_missing(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n,private,1\n2,medicare,0\n")
        ds = load_dataset(path, MIXED_SCHEMA)
        assert math.isnan(ds.column("stage")[0])

    def test_unknown_column_rejected(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome,extra\n1,private,1,9\n2,medicare,0,9\n")
        with pytest.raises(DataError, match="unknown column"):
            load_dataset(path, MIXED_SCHEMA)

    def test_unparseable_cell_rejected(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\nbad,private,1\n2,medicare,0\n")
        with pytest.raises(DataError, match="unparseable"):
            load_dataset(path, MIXED_SCHEMA)

    def test_undeclared_category_rejected(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n1,tricare,1\n2,medicare,0\n")
        with pytest.raises(DataError, match="unknown category"):
            load_dataset(path, MIXED_SCHEMA)

    def test_label_outside_binary_rejected(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n1,private,2\n2,medicare,0\n")
        with pytest.raises(DataError, match="label"):
            load_dataset(path, MIXED_SCHEMA)

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_dataset(write_csv(tmp_path, ""), MIXED_SCHEMA)

    def test_csv_roundtrip(self, tmp_path):
        path = write_csv(tmp_path, "stage,insurance,outcome\n1,,1\n,medicare,0\n3,private,1\n")
        ds = load_dataset(path, MIXED_SCHEMA)
        out = tmp_path / "echo.csv"
        save_dataset_csv(ds, out)
        again = load_dataset(out, ds.schema.with_id_column())
        assert again.row_ids == ds.row_ids
        assert again.schema.fingerprint() == ds.schema.fingerprint()
        np.testing.assert_array_equal(ds.labels, again.labels)
        np.testing.assert_array_equal(np.isnan(ds.rows), np.isnan(again.rows))
        assert np.array_equal(ds.rows[~np.isnan(ds.rows)], again.rows[~np.isnan(again.rows)])


class TestStratifiedSplit:
    def test_forced_proportions(self):
        ds = make_dataset(np.arange(20).reshape(10, 2), [1] * 5 + [0] * 5)
        train, test = stratified_split(ds, SplitSpec(0.2, seed=1))
        assert test.class_counts() == {1: 1, 0: 1}
        assert train.n_rows == 8

    def test_deterministic_for_seed(self):
        ds = make_dataset(np.arange(40).reshape(20, 2), [1] * 12 + [0] * 8)
        a = stratified_split(ds, SplitSpec(0.25, seed=7))
        b = stratified_split(ds, SplitSpec(0.25, seed=7))
        assert a[0].row_ids == b[0].row_ids and a[1].row_ids == b[1].row_ids

    def test_partition_is_exact(self):
        ds = make_dataset(np.arange(60).reshape(30, 2), [1] * 18 + [0] * 12)
        train, test = stratified_split(ds, SplitSpec(0.3, seed=2))
        assert set(train.row_ids) | set(test.row_ids) == set(ds.row_ids)
        assert not (set(train.row_ids) & set(test.row_ids))

    def test_production_scale_counts(self):
        n = 85432
        labels = np.zeros(n, dtype=np.int8)
        labels[: int(round(0.749 * n))] = 1
        ds = make_dataset(np.zeros((n, 1)), labels)
        train, test = stratified_split(ds, SplitSpec(0.2, seed=0))
        assert test.n_rows == 17087
        assert train.n_rows == 68345

    def test_tiny_class_rejected(self):
        ds = make_dataset(np.zeros((5, 1)), [1, 0, 0, 0, 0])
        with pytest.raises(DataError, match="fewer than 2"):
            stratified_split(ds, SplitSpec(0.2, seed=0))


class TestSubsample:
    def test_identity_at_full_size(self):
        ds = make_dataset(np.arange(30).reshape(15, 2), [1] * 8 + [0] * 7)
        sub = subsample_train(ds, 15, seed=3)
        assert set(sub.row_ids) == set(ds.row_ids)

    def test_different_seeds_differ(self):
        ds = make_dataset(np.arange(400).reshape(200, 2), [1] * 100 + [0] * 100)
        a = subsample_train(ds, 100, seed=1)
        b = subsample_train(ds, 100, seed=2)
        assert set(a.row_ids) != set(b.row_ids)

    def test_same_seed_identical(self):
        ds = make_dataset(np.arange(400).reshape(200, 2), [1] * 100 + [0] * 100)
        assert subsample_train(ds, 100, seed=1).row_ids == subsample_train(ds, 100, seed=1).row_ids

    def test_both_classes_always_present(self):
        ds = make_dataset(np.arange(200).reshape(100, 2), [1] * 2 + [0] * 98)
        for seed in range(25):
            sub = subsample_train(ds, 3, seed=seed)
            counts = sub.class_counts()
            assert counts[0] > 0 and counts[1] > 0
            assert "subsample_attempts" in sub.meta

    def test_size_bounds(self):
        ds = make_dataset(np.arange(20).reshape(10, 2), [1] * 5 + [0] * 5)
        with pytest.raises(ValueError):
            subsample_train(ds, 1, seed=0)
        with pytest.raises(ValueError):
            subsample_train(ds, 11, seed=0)


class TestSynthetic:
    def test_declared_direction_holds_empirically(self):
        spec = SyntheticSpec(n=10000, seed=5, monotone_features=(("sev", -1, 2.0),), noise_features=0)
        ds = generate_synthetic(spec)
        sev = ds.column("sev")
        high = ds.labels[sev >= np.median(sev)].mean()
        low = ds.labels[sev < np.median(sev)].mean()
        assert high < low

    def test_half_label_noise_destroys_signal(self):
        spec = SyntheticSpec(n=8000, seed=6, monotone_features=(("sev", -1, 2.0),), label_noise=0.5)
        ds = generate_synthetic(spec)
        # score by the true (noise-free) signal: stronger than anything learnable
        scores = -ds.column("sev")
        assert abs(auc_roc(scores, ds.labels) - 0.5) < 0.05

    def test_binary_feature_matches_closed_form_auc(self):
        # With one binary feature at effect e, P(y=1 | x) = sigmoid(+-e/2) and
        # the threshold rule's AUC works out to sigmoid(e/2).
        effect = 2.0
        spec = SyntheticSpec(
            n=20000, seed=8, monotone_features=(("flag", 1, effect),), levels=2, label_noise=0.0
        )
        ds = generate_synthetic(spec)
        expected = 1.0 / (1.0 + math.exp(-effect / 2.0))
        assert abs(auc_roc(ds.column("flag"), ds.labels) - expected) < 0.02

    def test_zero_effect_rejected(self):
        with pytest.raises(ValueError, match="effect"):
            SyntheticSpec(n=100, seed=0, monotone_features=(("sev", -1, 0.0),))

    def test_noise_flip_count_exact(self):
        spec = SyntheticSpec(n=1000, seed=3, monotone_features=(("sev", -1, 5.0),), label_noise=0.2)
        clean = generate_synthetic(
            SyntheticSpec(n=1000, seed=3, monotone_features=(("sev", -1, 5.0),), label_noise=0.0)
        )
        noisy = generate_synthetic(spec)
        assert int((clean.labels != noisy.labels).sum()) == 200


class TestEncoding:
    def test_one_hot_roundtrip_including_nan(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "stage,insurance,outcome\n1,,1\n2,medicare,0\n3,private,1\n1,medicaid,0\n", encoding="utf-8"
        )
        ds = load_dataset(path, MIXED_SCHEMA)
        enc = encode(ds)
        decoded = decode_categoricals(enc, ds.schema)
        assert decoded["insurance"] == [MISSING_CATEGORY, "medicare", "private", "medicaid"]

    def test_ordinal_missing_preserved_in_encoding(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("stage,insurance,outcome\n,private,1\n2,medicare,0\n", encoding="utf-8")
        ds = load_dataset(path, MIXED_SCHEMA)
        enc = encode(ds)
        assert math.isnan(enc.X[0, enc.columns.index("stage")])

    def test_rows_are_immutable(self):
        ds = make_dataset(np.zeros((4, 2)), [0, 1, 0, 1])
        with pytest.raises(ValueError):
            ds.rows[0, 0] = 5.0
