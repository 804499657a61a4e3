import numpy as np
import pandas as pd
import pytest

from uqtab.core.errors import ClassTooSmall, EmptyFile, MissingColumn, MissingValue, UnknownLevel
from uqtab.core.paths import DATASET_PATH, SAMPLE_DATASET_PATH
from uqtab.core.seeds import make_rng
from uqtab.modules.data.plots import render_age_histogram
from uqtab.modules.data.services import (
    DatasetTable,
    EncodedMatrix,
    LabelVector,
    decode,
    descriptive_stats,
    encode,
    load_csv,
    standardize,
    stratified_folds,
    stratified_split,
)

requires_dataset = pytest.mark.skipif(not DATASET_PATH.exists(), reason="data/Thyroid_Diff.csv not present")


def _write(tmp_path, frame, name="rows.csv"):
    path = tmp_path / name
    frame.to_csv(path, index=False)
    return path


class TestLoadCsv:
    def test_loads_in_schema_order(self, thyroid_csv, schema):
        table = load_csv(thyroid_csv, schema)
        assert table.n == 120
        assert list(table.frame.columns) == schema.column_names

    def test_missing_column(self, tmp_path, thyroid_csv, schema):
        frame = pd.read_csv(thyroid_csv).drop(columns=["Risk"])
        with pytest.raises(MissingColumn):
            load_csv(_write(tmp_path, frame), schema)

    def test_unknown_level_reports_row(self, tmp_path, thyroid_csv, schema):
        frame = pd.read_csv(thyroid_csv)
        frame.loc[4, "Risk"] = "Extreme"
        with pytest.raises(UnknownLevel) as info:
            load_csv(_write(tmp_path, frame), schema)
        assert (info.value.row, info.value.column, info.value.value) == (5, "Risk", "Extreme")

    def test_missing_value(self, tmp_path, thyroid_csv, schema):
        frame = pd.read_csv(thyroid_csv).astype(str)
        frame.loc[0, "Age"] = ""
        with pytest.raises(MissingValue):
            load_csv(_write(tmp_path, frame), schema)

    def test_header_only_file(self, tmp_path, schema):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(schema.column_names) + "\n", encoding="utf-8")
        with pytest.raises(EmptyFile):
            load_csv(path, schema)

    def test_public_headers_map_through_aliases(self, bundled_schema):
        assert bundled_schema.canonical_name("Hx Radiothreapy") == "Hx Radiotherapy"
        assert bundled_schema.canonical_name("Physical Examination") == "Goiter Type"


class TestDescriptiveStats:
    def test_sample_stddev_and_counts(self, schema):
        frame = pd.DataFrame({
            "Age": [20.0, 30.0, 40.0, 50.0],
            "Gender": ["F", "F", "M", "F"],
            "Adenopathy": ["No", "No", "Left", "No"],
            "Risk": ["Low", "High", "Low", "Low"],
            "Response": ["Excellent"] * 4,
            "Recurred": ["No", "Yes", "No", "No"],
        })
        report = descriptive_stats(DatasetTable(frame=frame, schema=schema))
        age = report.numeric["Age"]
        assert age.mean == pytest.approx(35.0)
        assert age.stddev == pytest.approx(np.std([20, 30, 40, 50], ddof=1))
        assert report.target_counts == {"No": 3, "Yes": 1}
        risk = {row.level: row for row in report.categorical["Risk"]}
        assert risk["High"].by_target == {"No": 0, "Yes": 1}
        assert risk["Intermediate"].total == 0
        assert risk["Low"].percent_of_total["No"] == pytest.approx(75.0)

    def test_histogram_covers_every_row(self, thyroid_csv, schema):
        report = descriptive_stats(load_csv(thyroid_csv, schema))
        assert report.histogram_column == "Age"
        assert sum(sum(b.by_target.values()) for b in report.histogram) == report.n
        assert "<svg" in render_age_histogram(report)

    @requires_dataset
    @pytest.mark.dataset
    def test_bundled_dataset_tables(self, bundled_schema):
        report = descriptive_stats(load_csv(DATASET_PATH, bundled_schema))
        age = report.numeric["Age"]
        assert (age.min, age.max) == (15, 82)
        assert round(age.mean, 3) == 40.867
        assert round(age.stddev, 3) == 15.134
        assert report.target_counts == {"No": 275, "Yes": 108}
        m1 = next(row for row in report.categorical["M"] if row.level == "M1")
        assert m1.by_target == {"No": 0, "Yes": 18}


class TestBundledSample:
    def test_original_headers_load_through_aliases(self, bundled_schema):
        table = load_csv(SAMPLE_DATASET_PATH, bundled_schema)
        assert table.n == 150
        assert list(table.frame.columns) == bundled_schema.column_names
        report = descriptive_stats(table)
        assert report.target_counts == {"No": 104, "Yes": 46}
        assert (report.numeric["Age"].min, report.numeric["Age"].max) == (15, 82)
        m1 = next(row for row in report.categorical["M"] if row.level == "M1")
        assert m1.by_target == {"No": 1, "Yes": 5}

    def test_encodes_sixteen_features(self, bundled_schema):
        X, y = encode(load_csv(SAMPLE_DATASET_PATH, bundled_schema))
        assert X.d == 16
        assert X.feature_names == tuple(bundled_schema.feature_names)
        assert int(y.labels.sum()) == 46
        response = X.values[:, X.feature_names.index("Response")]
        assert set(np.unique(response)) == {0.0, 1.0, 2.0, 3.0}


class TestEncoding:
    def test_ordinal_and_binary_codes(self, thyroid_csv, schema):
        table = load_csv(thyroid_csv, schema)
        X, y = encode(table)
        risk = X.values[:, X.feature_names.index("Risk")]
        expected = table.frame["Risk"].map({"Low": 0, "Intermediate": 1, "High": 2}).to_numpy()
        np.testing.assert_array_equal(risk, expected)
        gender = X.values[:, X.feature_names.index("Gender")]
        np.testing.assert_array_equal(gender, (table.frame["Gender"] == "M").to_numpy().astype(float))
        np.testing.assert_array_equal(y.labels, (table.frame["Recurred"] == "Yes").to_numpy().astype(int))

    def test_decode_restores_the_table(self, thyroid_csv, schema):
        table = load_csv(thyroid_csv, schema)
        X, y = encode(table)
        scaled, _ = standardize(X)
        restored = decode(scaled, schema, y)
        pd.testing.assert_frame_equal(
            restored.frame.reset_index(drop=True),
            table.frame.reset_index(drop=True),
            check_dtype=False,
        )


class TestStandardize:
    def test_train_statistics(self):
        X = EncodedMatrix(values=np.array([[1.0, 5.0], [2.0, 5.0], [6.0, 5.0]]), feature_names=("a", "b"))
        other = EncodedMatrix(values=np.array([[3.0, 5.0]]), feature_names=("a", "b"))
        scaled, (scaled_other,) = standardize(X, [other])
        assert scaled.values[:, 0].mean() == pytest.approx(0.0, abs=1e-12)
        assert scaled.values[:, 0].std(ddof=1) == pytest.approx(1.0)
        # constant column passes through
        np.testing.assert_array_equal(scaled.values[:, 1], [5.0, 5.0, 5.0])
        assert scaled.scaler.constant_columns == ["b"]
        assert scaled_other.values[0, 0] == pytest.approx((3.0 - 3.0) / np.std([1, 2, 6], ddof=1))
        np.testing.assert_allclose(scaled.unscaled().values, X.values)


class TestSplit:
    def _labels(self, negatives, positives):
        y = LabelVector(np.array([0] * negatives + [1] * positives))
        X = EncodedMatrix(values=np.zeros((y.n, 1)), feature_names=("x",))
        return X, y

    def test_sizes_round_half_up(self):
        X, y = self._labels(275, 108)
        split = stratified_split(X, y, 0.8, seed=3)
        assert split.train_idx.size == 220 + 86
        assert split.test_idx.size == 77
        assert int(y.labels[split.test_idx].sum()) == 22
        assert not set(split.train_idx) & set(split.test_idx)

    def test_deterministic(self):
        X, y = self._labels(30, 12)
        first = stratified_split(X, y, 0.75, seed=9)
        second = stratified_split(X, y, 0.75, seed=9)
        np.testing.assert_array_equal(first.train_idx, second.train_idx)

    def test_train_proportions_track_global_over_seeds(self):
        rng = np.random.default_rng(21)
        for seed in range(300):
            negatives = int(rng.integers(10, 300))
            positives = int(rng.integers(5, negatives + 1))
            ratio = float(rng.uniform(0.6, 0.9))
            X, y = self._labels(negatives, positives)
            split = stratified_split(X, y, ratio, seed=seed)
            assert np.array_equal(np.sort(np.concatenate([split.train_idx, split.test_idx])), np.arange(y.n))
            train_share = y.labels[split.train_idx].mean()
            global_share = positives / y.n
            assert abs(train_share - global_share) < 1.0 / min(negatives, positives)

    def test_class_too_small(self):
        X, y = self._labels(10, 1)
        with pytest.raises(ClassTooSmall):
            stratified_split(X, y, 0.8, seed=0)

    def test_folds_stratify(self):
        labels = np.array([0] * 20 + [1] * 10)
        folds = stratified_folds(labels, 5, make_rng(1))
        assert sorted(np.concatenate(folds).tolist()) == list(range(30))
        for valid in folds:
            assert labels[valid].sum() == 2
