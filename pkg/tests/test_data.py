import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscopt.classifier import Regularization, predict_proba, train
from mscopt.data import (
    CostSchema,
    Dataset,
    SplitSpec,
    assign_gini_cost_classes,
    impute_standardize,
    load_csv,
    make_synthetic,
    percentile_cost_class,
    split,
)

HEART_CLASSES = (1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 1, 1)
PIMA_CLASSES = (1, 3, 2, 2, 3, 2, 2, 1)


class TestCostSchema:
    def test_power10(self):
        schema = CostSchema((1, 1, 2, 2), "power10")
        assert schema.costs == (10.0, 10.0, 100.0, 100.0)

    def test_linear100_pima(self):
        schema = CostSchema(PIMA_CLASSES, "linear100")
        assert schema.costs == (100.0, 300.0, 200.0, 200.0, 300.0, 200.0, 200.0, 100.0)

    def test_power10_heart_range(self):
        schema = CostSchema(HEART_CLASSES, "power10")
        assert min(schema.costs) == 10.0
        assert max(schema.costs) == 100.0

    def test_custom_table(self):
        schema = CostSchema((1, 3), {1: 2.5, 3: 7.0})
        assert schema.costs == (2.5, 7.0)

    def test_table_missing_class(self):
        with pytest.raises(ValueError, match="missing"):
            CostSchema((1, 2), {1: 2.5})

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_rejects_bad_class(self, bad):
        with pytest.raises(ValueError):
            CostSchema((1, bad), "power10")

    @given(st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=12),
           st.sampled_from(["power10", "linear100"]))
    def test_costs_always_positive(self, classes, scaling):
        schema = CostSchema(tuple(classes), scaling)
        assert all(c > 0 for c in schema.costs)
        assert len(schema.costs) == len(classes)


class TestLoadCsv:
    def _write(self, tmp_path, csv_text, cost_doc):
        data = tmp_path / "d.csv"
        data.write_text(csv_text)
        costs = tmp_path / "c.json"
        costs.write_text(json.dumps(cost_doc))
        return data, costs

    def test_roundtrip_with_missing(self, tmp_path):
        data, costs = self._write(
            tmp_path,
            "a,b,label\n1.0,2.0,0\n,3.5,1\n4.0,,0\n",
            {"scaling": "power10", "classes": {"a": 1, "b": 2}},
        )
        ds, schema = load_csv(data, costs)
        assert ds.n_samples == 3 and ds.n_features == 2 and ds.n_classes == 2
        assert np.isnan(ds.features[1, 0]) and np.isnan(ds.features[2, 1])
        assert schema.costs == (10.0, 100.0)

    def test_unknown_feature_in_costs(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,label\n1,0\n2,1\n",
            {"scaling": "linear100", "classes": {"a": 1, "zz": 2}},
        )
        with pytest.raises(ValueError, match="unknown features"):
            load_csv(data, costs)

    def test_uncosted_feature(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,b,label\n1,2,0\n2,1,1\n",
            {"scaling": "linear100", "classes": {"a": 1}},
        )
        with pytest.raises(ValueError, match="without a cost class"):
            load_csv(data, costs)

    def test_nonpositive_cost_class(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,label\n1,0\n2,1\n",
            {"scaling": "linear100", "classes": {"a": 0}},
        )
        with pytest.raises(ValueError, match="positive"):
            load_csv(data, costs)

    def test_missing_label_column(self, tmp_path):
        data, costs = self._write(tmp_path, "label\n1\n", {"scaling": "power10", "classes": {}})
        with pytest.raises(ValueError, match="label column"):
            load_csv(data, costs)

    def test_ragged_row(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,b,label\n1,2,0\n3,1\n",
            {"scaling": "power10", "classes": {"a": 1, "b": 1}},
        )
        with pytest.raises(ValueError, match="row 3"):
            load_csv(data, costs)

    def test_non_numeric_cell(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,label\noops,0\n1,1\n",
            {"scaling": "power10", "classes": {"a": 1}},
        )
        with pytest.raises(ValueError, match="not a number"):
            load_csv(data, costs)

    def test_string_labels_map_to_indices(self, tmp_path):
        data, costs = self._write(
            tmp_path, "a,label\n1,yes\n2,no\n3,yes\n",
            {"scaling": "power10", "classes": {"a": 1}},
        )
        ds, _ = load_csv(data, costs)
        assert sorted(set(ds.labels)) == [0, 1]


def _balanced_dataset(n_per_class, n_classes=2):
    n = n_per_class * n_classes
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((n, 3))
    labels = np.repeat(np.arange(n_classes), n_per_class)
    return Dataset(feats, labels, ("a", "b", "c"), n_classes)


class TestSplit:
    def test_exact_division(self):
        ds = _balanced_dataset(50)
        tr, va, te = split(ds, SplitSpec((0.5, 0.25, 0.25), 0))
        assert (tr.n_samples, va.n_samples, te.n_samples) == (50, 25, 25)

    def test_rounding_within_one(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.standard_normal((101, 2)), rng.integers(0, 2, 101), ("a", "b"), 2)
        parts = split(ds, SplitSpec((0.5, 0.25, 0.25), 0))
        sizes = [p.n_samples for p in parts]
        assert sum(sizes) == 101
        for size, frac in zip(sizes, (0.5, 0.25, 0.25)):
            assert abs(size - 101 * frac) <= 1

    def test_small_classes_keep_totals_within_one(self):
        # Three classes of 3 samples each; naive per-class rounding drifts.
        rng = np.random.default_rng(2)
        ds = Dataset(rng.standard_normal((9, 2)), np.repeat([0, 1, 2], 3), ("a", "b"), 3)
        parts = split(ds, SplitSpec((0.5, 0.25, 0.25), 0))
        for part, frac in zip(parts, (0.5, 0.25, 0.25)):
            assert abs(part.n_samples - 9 * frac) <= 1

    def test_deterministic(self):
        ds = _balanced_dataset(33)
        a = split(ds, SplitSpec((0.5, 0.25, 0.25), 42))
        b = split(ds, SplitSpec((0.5, 0.25, 0.25), 42))
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.features, pb.features)
            assert np.array_equal(pa.labels, pb.labels)

    def test_disjoint_and_exhaustive(self):
        ds = _balanced_dataset(40)
        ds = Dataset(np.arange(80)[:, None] * 1.0, ds.labels, ("a",), 2)
        parts = split(ds, SplitSpec((0.5, 0.25, 0.25), 5))
        seen = np.concatenate([p.features[:, 0] for p in parts])
        assert sorted(seen) == list(range(80))

    def test_stratified(self):
        rng = np.random.default_rng(3)
        labels = np.array([0] * 80 + [1] * 20)
        ds = Dataset(rng.standard_normal((100, 2)), labels, ("a", "b"), 2)
        tr, va, te = split(ds, SplitSpec((0.5, 0.25, 0.25), 0))
        assert int((tr.labels == 1).sum()) == 10
        assert int((va.labels == 1).sum()) == 5
        assert int((te.labels == 1).sum()) == 5

    def test_empty_split_rejected(self):
        ds = _balanced_dataset(2)
        with pytest.raises(ValueError, match="empty split"):
            split(ds, SplitSpec((0.9, 0.05, 0.05), 0))

    def test_too_few_samples(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.standard_normal((3, 1)), np.array([0, 1, 0]), ("a",), 2)
        with pytest.raises(ValueError, match="at least 4"):
            split(ds, SplitSpec())


class TestImputeStandardize:
    def test_zscore_closed_form(self):
        ds = Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([0, 1, 0]), ("a",), 2)
        out, _, _ = impute_standardize(ds, [])
        np.testing.assert_allclose(out.features[:, 0], [-1.2247448, 0.0, 1.2247448], atol=1e-6)

    def test_zero_variance_column(self):
        ds = Dataset(np.array([[5.0], [5.0], [5.0]]), np.array([0, 1, 0]), ("a",), 2)
        out, _, record = impute_standardize(ds, [])
        assert np.array_equal(out.features[:, 0], [0.0, 0.0, 0.0])
        assert record.scales == (1.0,)

    def test_mean_imputation_before_scaling(self):
        ds = Dataset(np.array([[1.0], [np.nan], [3.0]]), np.array([0, 1, 0]), ("a",), 2)
        out, _, record = impute_standardize(ds, [])
        assert record.fill_values == (2.0,)
        assert out.features[1, 0] == 0.0  # imputed to the mean, which scales to 0

    def test_mode_imputation_for_categorical(self):
        ds = Dataset(
            np.array([[1.0], [1.0], [2.0], [np.nan]]),
            np.array([0, 1, 0, 1]),
            ("a",),
            2,
            categorical=(True,),
        )
        _, _, record = impute_standardize(ds, [])
        assert record.fill_values == (1.0,)

    def test_train_stats_applied_to_others(self):
        rng = np.random.default_rng(4)
        train_ds = Dataset(rng.standard_normal((50, 2)) * 3 + 1, rng.integers(0, 2, 50), ("a", "b"), 2)
        other = Dataset(rng.standard_normal((20, 2)), rng.integers(0, 2, 20), ("a", "b"), 2)
        out_train, (out_other,), record = impute_standardize(train_ds, [other])
        assert np.abs(out_train.features.mean(axis=0)).max() < 1e-9
        assert np.abs(out_train.features.var(axis=0) - 1).max() < 1e-9
        expected = (other.features - np.array(record.means)) / np.array(record.scales)
        np.testing.assert_allclose(out_other.features, expected)


class TestMakeSynthetic:
    def test_shapes_and_classes(self):
        ds = make_synthetic(30, 1000, 3, 25, seed=0)
        assert ds.n_samples == 1000 and ds.n_features == 30 and ds.n_classes == 3

    def test_proportional_labels(self):
        ds = make_synthetic(5, 999, 3, 3, seed=1)
        counts = np.bincount(ds.labels)
        assert counts.max() - counts.min() <= 1

    def test_learnable(self):
        ds = make_synthetic(4, 40, 2, 4, seed=2)
        clf = train(ds, range(4), Regularization("l2", 1.0))
        acc = (predict_proba(clf, ds.features).argmax(axis=1) == ds.labels).mean()
        assert acc > 0.8

    def test_noise_columns_uncorrelated_with_labels(self):
        worst = 0.0
        for seed in range(10):
            ds = make_synthetic(10, 1000, 2, 4, seed=seed)
            for c in range(4, 10):
                r = np.corrcoef(ds.features[:, c], ds.labels)[0, 1]
                worst = max(worst, abs(r))
        assert worst < 0.15

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            make_synthetic(4, 40, 2, 5, seed=0)
        with pytest.raises(ValueError):
            make_synthetic(4, 40, 1, 2, seed=0)


class TestGiniCostClasses:
    def test_percentile_bucket_map(self):
        assert [percentile_cost_class(x, 5) for x in (0.1, 0.3, 0.5, 0.7, 0.9)] == [1, 2, 3, 4, 5]

    def test_boundary_belongs_to_lower_bucket(self):
        assert percentile_cost_class(0.2, 5) == 1
        assert percentile_cost_class(0.2 + 1e-9, 5) == 2
        assert percentile_cost_class(1.0, 5) == 5

    def test_all_equal_importance_ties_break_by_index(self):
        # Constant features: every stump reduction is 0, so ranking falls back
        # to feature order and the five buckets are covered in index order.
        feats = np.ones((40, 5))
        labels = np.tile([0, 1], 20)
        ds = Dataset(feats, labels, tuple("abcde"), 2)
        schema = assign_gini_cost_classes(ds, 5)
        assert schema.cost_classes == (1, 2, 3, 4, 5)

    def test_most_informative_gets_highest_class(self):
        rng = np.random.default_rng(8)
        n = 400
        labels = rng.integers(0, 2, n)
        signal = labels * 2.0 - 1.0
        feats = np.column_stack([
            rng.standard_normal(n),            # pure noise
            signal * 0.5 + rng.standard_normal(n),
            signal * 3.0 + rng.standard_normal(n) * 0.1,  # strongest
        ])
        ds = Dataset(feats, labels, ("noise", "weak", "strong"), 2)
        schema = assign_gini_cost_classes(ds, 3)
        assert schema.cost_classes == (1, 2, 3)

    def test_deterministic(self):
        ds = make_synthetic(6, 200, 2, 4, seed=5)
        a = assign_gini_cost_classes(ds, 4)
        b = assign_gini_cost_classes(ds, 4)
        assert a.cost_classes == b.cost_classes
