import logging

import numpy as np
import pytest

from uqtab.core.errors import ClassTooSmall, FeatureMismatch, LengthMismatch, SingularFit
from uqtab.modules.data.services import EncodedMatrix, LabelVector
from uqtab.modules.models.families.base import ClassifierFamily, parse_hyperparams
from uqtab.modules.models.families.svm import SvmModel, kernel_matrix, kkt_violations, smo
from uqtab.modules.models.plots import render_accuracy_bars, render_confusion
from uqtab.modules.models.services import (
    CvCell,
    confusion,
    evaluate,
    fit,
    grid_search_cv,
    metrics,
    predict,
    predict_proba,
    refit_seed_for,
    select_best,
)
from uqtab.modules.resample.services import SmoteConfig
from uqtab.shared.models import ConfusionMatrix

FAST_PARAMS = {
    ClassifierFamily.LOGISTIC: {"l2_lambda": 0.01},
    ClassifierFamily.KNN: {"k": 3},
    ClassifierFamily.NAIVE_BAYES: {},
    ClassifierFamily.DECISION_TREE: {"max_depth": 3},
    ClassifierFamily.RANDOM_FOREST: {"n_trees": 15},
    ClassifierFamily.GRADIENT_BOOSTING: {"n_trees": 20, "depth": 2},
    ClassifierFamily.SVM: {"C": 1.0, "kernel": "rbf"},
    ClassifierFamily.MLP: {"hidden_units": 8, "learning_rate": 1e-2, "epochs": 150},
}


def _blobs(n=60, d=2, gap=2.5, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    values = np.vstack([rng.normal(-gap / 2, 0.6, (half, d)), rng.normal(gap / 2, 0.6, (n - half, d))])
    labels = np.array([0] * half + [1] * (n - half))
    return EncodedMatrix(values=values, feature_names=tuple(f"x{j}" for j in range(d))), LabelVector(labels)


class TestMetrics:
    def test_reconstructed_logistic_counts(self):
        report = metrics(ConfusionMatrix(tp=17, tn=57, fp=1, fn=2))
        assert report.accuracy == pytest.approx(74 / 77)
        assert round(report.precision, 4) == 0.9444
        assert round(report.recall, 4) == 0.8947
        assert round(report.f1, 4) == 0.9189

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            y = rng.integers(0, 2, n)
            yhat = rng.integers(0, 2, n)
            report = evaluate(yhat, y)
            tp = sum(1 for a, b in zip(yhat, y) if a == 1 and b == 1)
            fp = sum(1 for a, b in zip(yhat, y) if a == 1 and b == 0)
            fn = sum(1 for a, b in zip(yhat, y) if a == 0 and b == 1)
            assert report.accuracy == pytest.approx(sum(yhat == y) / n, abs=1e-12)
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            assert report.precision == pytest.approx(precision, abs=1e-12)
            assert report.recall == pytest.approx(recall, abs=1e-12)
            assert report.f1 == pytest.approx(f1, abs=1e-12)

    def test_zero_denominators_are_flagged(self):
        report = evaluate([0, 0, 0], [0, 0, 0])
        assert report.accuracy == 1.0
        assert report.precision == 0.0
        assert set(report.undefined) == {"precision", "recall", "f1"}

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([0, 1], [0, 1, 1])


class TestFamilies:
    @pytest.mark.parametrize("family", list(ClassifierFamily))
    def test_separable_blobs(self, family):
        X, y = _blobs()
        X_test, y_test = _blobs(seed=1)
        model = fit(family, FAST_PARAMS[family], X, y, seed=4)
        proba = predict_proba(model, X_test)
        assert proba.shape == (X_test.n,)
        assert np.all((proba >= 0) & (proba <= 1))
        assert evaluate(predict(model, X_test), y_test).accuracy >= 0.9
        assert model.n_parameters > 0

    @pytest.mark.parametrize("family", list(ClassifierFamily))
    def test_deterministic_per_seed(self, family):
        X, y = _blobs(seed=5)
        first = predict_proba(fit(family, FAST_PARAMS[family], X, y, seed=9), X)
        second = predict_proba(fit(family, FAST_PARAMS[family], X, y, seed=9), X)
        np.testing.assert_array_equal(first, second)

    def test_parameter_counts(self):
        X, y = _blobs(d=3)
        assert fit(ClassifierFamily.LOGISTIC, None, X, y, seed=0).n_parameters == 4
        assert fit(ClassifierFamily.NAIVE_BAYES, None, X, y, seed=0).n_parameters == 4 * 3 + 2
        assert fit(ClassifierFamily.KNN, {"k": 3}, X, y, seed=0).n_parameters == X.n * 3
        svm = fit(ClassifierFamily.SVM, {"kernel": "linear"}, X, y, seed=0)
        assert svm.n_parameters == svm.n_support * 4 + 1

    def test_tree_respects_depth(self):
        X, y = _blobs(seed=2, gap=0.5)
        model = fit(ClassifierFamily.DECISION_TREE, {"max_depth": 2}, X, y, seed=0)
        assert model.tree.depth <= 2

    def test_single_class_rejected_except_naive_bayes(self):
        X, _ = _blobs()
        y = LabelVector(np.zeros(X.n, dtype=int))
        with pytest.raises(SingularFit):
            fit(ClassifierFamily.LOGISTIC, None, X, y, seed=0)
        model = fit(ClassifierFamily.NAIVE_BAYES, None, X, y, seed=0)
        assert np.all(predict(model, X) == 0)

    def test_feature_mismatch(self):
        X, y = _blobs()
        model = fit(ClassifierFamily.LOGISTIC, None, X, y, seed=0)
        with pytest.raises(FeatureMismatch):
            model.predict_proba(X.values, ("a", "b"))
        with pytest.raises(FeatureMismatch):
            model.predict_proba(np.zeros((2, 3)))

    def test_smo_satisfies_kkt(self):
        X, y = _blobs(n=40, gap=1.0, seed=6)
        signed = np.where(y.labels > 0, 1.0, -1.0)
        K = kernel_matrix(X.values, X.values, "rbf", 0.5)
        alpha, rho, _, violation = smo(K, signed, 1.0, 1e-3, 10000)
        assert violation < 1e-3
        assert kkt_violations(alpha, signed, K, rho, 1.0, 1e-2).size == 0
        assert abs(float(alpha @ signed)) < 1e-8

    def test_svm_fit_checks_kkt(self, caplog):
        X, y = _blobs(n=40, gap=1.0, seed=6)
        model = fit(ClassifierFamily.SVM, {"C": 1.0, "kernel": "rbf", "gamma": 0.5}, X, y, seed=0)
        assert model.kkt_violation_count == 0

        X, y = _blobs(n=40, gap=0.5, seed=6)
        with caplog.at_level(logging.WARNING, logger="uqtab.modules.models.families.svm"):
            model = fit(ClassifierFamily.SVM, {"kernel": "rbf", "max_iter": 1}, X, y, seed=0)
        assert model.kkt_violation_count > 0
        assert any("KKT" in record.getMessage() for record in caplog.records)

    def test_naive_bayes_fits_one_row(self):
        X = EncodedMatrix(values=np.array([[1.0, 2.0]]), feature_names=("a", "b"))
        model = fit(ClassifierFamily.NAIVE_BAYES, None, X, LabelVector(np.array([1])), seed=0)
        query = np.array([[1.0, 2.0], [-3.0, 5.0]])
        np.testing.assert_array_equal(predict_proba(model, query), [1.0, 1.0])
        with pytest.raises(SingularFit):
            fit(ClassifierFamily.LOGISTIC, None, X, LabelVector(np.array([1])), seed=0)
        with pytest.raises(ValueError):
            fit(ClassifierFamily.NAIVE_BAYES, None, np.zeros((0, 2)), np.zeros(0, dtype=int), seed=0)

    def test_depth_two_tree_separates_xor(self):
        corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        values = np.repeat(corners, 3, axis=0)
        labels = (values[:, 0] != values[:, 1]).astype(int)
        X = EncodedMatrix(values=values, feature_names=("a", "b"))
        model = fit(ClassifierFamily.DECISION_TREE, {"max_depth": 2}, X, LabelVector(labels), seed=0)
        assert model.tree.depth == 2
        np.testing.assert_array_equal(predict(model, X), labels)

    def test_one_nearest_neighbor_reproduces_training_labels(self):
        X, y = _blobs(gap=0.5, seed=8)
        model = fit(ClassifierFamily.KNN, {"k": 1}, X, y, seed=0)
        assert evaluate(predict(model, X), y).accuracy == 1.0

    def test_boosting_without_trees_predicts_base_rate(self):
        X, _ = _blobs(n=60, seed=9)
        labels = np.array([0] * 45 + [1] * 15)
        model = fit(ClassifierFamily.GRADIENT_BOOSTING, {"n_trees": 0}, X, LabelVector(labels), seed=0)
        assert model.trees == []
        assert model.init_score == pytest.approx(np.log(0.25 / 0.75), abs=1e-12)
        np.testing.assert_allclose(predict_proba(model, X), 0.25, atol=1e-12)

    def test_single_full_tree_forest_equals_decision_tree(self):
        X, y = _blobs(seed=2, gap=0.5)
        X_test, _ = _blobs(seed=3, gap=0.5)
        tree = fit(ClassifierFamily.DECISION_TREE, {"max_depth": 3}, X, y, seed=0)
        forest = fit(
            ClassifierFamily.RANDOM_FOREST,
            {"n_trees": 1, "bootstrap": False, "feature_subset": "all", "max_depth": 3},
            X, y, seed=5,
        )
        grown = forest.trees[0]
        np.testing.assert_array_equal(grown.feature, tree.tree.feature)
        np.testing.assert_array_equal(grown.threshold, tree.tree.threshold)
        np.testing.assert_array_equal(predict(forest, X_test), predict(tree, X_test))

    def test_svm_zero_decision_value_is_one_half(self):
        hp = parse_hyperparams(ClassifierFamily.SVM, {"kernel": "linear"})
        model = SvmModel(
            hp, ("x",), support_vectors=np.zeros((0, 1)), dual_coef=np.zeros(0),
            rho=0.0, gamma=1.0, iterations=0, violation=0.0,
        )
        query = np.array([[-2.0], [0.0], [3.0]])
        np.testing.assert_array_equal(model.decision_function(query), 0.0)
        np.testing.assert_array_equal(model.predict_proba(query), 0.5)
        np.testing.assert_array_equal(model.predict(query), 0)


class TestGridSearch:
    def test_cells_and_refit(self):
        X, y = _blobs(n=50, seed=3)
        grid = [{"max_depth": 1}, {"max_depth": 3}]
        result = grid_search_cv(ClassifierFamily.DECISION_TREE, grid, X, y, [2, 5], seed=8)
        assert len(result.cells) == 4
        assert sum(row["selected"] for row in result.table_rows()) == 1
        assert result.refit_seed == refit_seed_for(8, ClassifierFamily.DECISION_TREE, result.best.grid_index)
        assert all(len(c.fold_accuracies) == c.folds for c in result.cells)
        assert result.best_for_folds(5).folds == 5

    def test_deterministic(self):
        X, y = _blobs(n=50, seed=3)
        grid = [{"l2_lambda": 0.0}, {"l2_lambda": 1.0}]
        runs = [
            grid_search_cv(ClassifierFamily.LOGISTIC, grid, X, y, 5, seed=2, smote_cfg=SmoteConfig(k_neighbors=3))
            for _ in range(2)
        ]
        assert runs[0].table_rows() == runs[1].table_rows()

    def test_parallel_matches_serial(self):
        X, y = _blobs(n=50, seed=3)
        grid = [{"k": 3}, {"k": 5}, {"k": 7}]
        serial = grid_search_cv(ClassifierFamily.KNN, grid, X, y, [2, 5], seed=1)
        parallel = grid_search_cv(ClassifierFamily.KNN, grid, X, y, [2, 5], seed=1, workers=3)
        assert serial.table_rows() == parallel.table_rows()

    def test_ties_go_to_fewer_folds_then_earlier_grid(self):
        hp = parse_hyperparams(ClassifierFamily.KNN, {"k": 3})
        cells = [
            CvCell(ClassifierFamily.KNN, 1, hp, 5, mean_accuracy=0.9),
            CvCell(ClassifierFamily.KNN, 0, hp, 5, mean_accuracy=0.9),
            CvCell(ClassifierFamily.KNN, 2, hp, 2, mean_accuracy=0.9),
        ]
        assert (select_best(cells).folds, select_best(cells).grid_index) == (2, 2)
        assert select_best(cells[:2]).grid_index == 0

    def test_three_neighbors_outvote_a_mislabeled_point(self):
        # one positive at the origin ringed by four negatives; the rest are two far clusters
        ring = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        negatives = [[10.0 + i % 2, float(i // 2) - 1.0] for i in range(6)]
        positives = [[50.0 + i % 3, 50.0 + i // 3] for i in range(9)]
        values = np.array([[0.0, 0.0]] + ring + negatives + positives)
        labels = np.array([1] + [0] * 10 + [1] * 9)
        X = EncodedMatrix(values=values, feature_names=("a", "b"))
        result = grid_search_cv(ClassifierFamily.KNN, [{"k": 1}, {"k": 3}], X, LabelVector(labels), 5, seed=4)
        accuracy = {cell.hp.k: cell.mean_accuracy for cell in result.cells}
        assert accuracy[3] == pytest.approx(0.95)
        assert accuracy[1] < accuracy[3]
        assert result.best.hp.k == 3

    def test_too_many_folds(self):
        values = np.arange(12, dtype=float).reshape(-1, 1)
        X = EncodedMatrix(values=values, feature_names=("x",))
        y = LabelVector(np.array([0] * 9 + [1] * 3))
        with pytest.raises(ClassTooSmall):
            grid_search_cv(ClassifierFamily.KNN, [{"k": 1}], X, y, 5, seed=0)


class TestPlots:
    def test_confusion_and_bars_render(self):
        svg = render_confusion(ConfusionMatrix(tp=17, tn=57, fp=1, fn=2), "LR", "reduced")
        assert "<svg" in svg
        assert "57" in svg
        bars = render_accuracy_bars(["LR", "KNN"], {"Full": {"LR": 0.9, "KNN": 0.8}, "Reduced": {"LR": 0.95}}, "Accuracy")
        assert "Reduced" in bars
