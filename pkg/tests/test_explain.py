import itertools
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from uqtab.core.artifacts import ArtifactStore
from uqtab.core.errors import NonFiniteModelOutput, TooManyFeatures
from uqtab.modules.data.services import EncodedMatrix
from uqtab.modules.explain.plots import (
    decision_layout,
    render_bar,
    render_beeswarm,
    render_decision,
    render_shap,
    render_waterfall,
    waterfall_layout,
)
from uqtab.modules.explain.services import (
    BackgroundSet,
    exact_shap,
    explain_rows,
    explanations_to_dict,
    global_ranking,
    make_background,
)


def _permutation_shapley(values, d):
    """Average marginal contribution over every ordering"""
    phi = np.zeros(d)
    orders = list(itertools.permutations(range(d)))
    for order in orders:
        mask = 0
        for j in order:
            phi[j] += values[mask | (1 << j)] - values[mask]
            mask |= 1 << j
    return phi / len(orders)


def _nonlinear(X):
    X = np.atleast_2d(X)
    return 1.0 / (1.0 + np.exp(-(X[:, 0] * X[:, 1] - 0.5 * X[:, 2] + np.sin(X[:, -1]))))


class TestExactShap:
    def test_product_splits_evenly(self):
        bg = BackgroundSet(rows=np.zeros((1, 2)))
        explanation = exact_shap(lambda X: X[:, 0] * X[:, 1], np.array([1.0, 1.0]), bg)
        np.testing.assert_allclose(explanation.phi, [0.5, 0.5])
        assert (explanation.phi0, explanation.fx) == (0.0, 1.0)

    def test_linear_closed_form(self):
        rng = np.random.default_rng(0)
        weights = np.array([0.5, -1.0, 2.0, 0.0])
        bg = BackgroundSet(rows=rng.normal(size=(15, 4)))
        x = rng.normal(size=4)
        explanation = exact_shap(lambda X: X @ weights + 0.3, x, bg)
        np.testing.assert_allclose(explanation.phi, weights * (x - bg.rows.mean(axis=0)), atol=1e-12)
        assert explanation.phi[3] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_matches_permutation_average(self, d):
        rng = np.random.default_rng(d)
        bg = BackgroundSet(rows=rng.normal(size=(8, d)))
        predict = _nonlinear if d >= 3 else (lambda X: np.tanh(np.atleast_2d(X).sum(axis=1)) ** 2)
        explanation = exact_shap(predict, rng.normal(size=d), bg, keep_values=True)
        np.testing.assert_allclose(
            explanation.phi, _permutation_shapley(explanation.coalition_values, d), atol=1e-12
        )

    def test_efficiency(self):
        rng = np.random.default_rng(4)
        bg = BackgroundSet(rows=rng.normal(size=(20, 6)))
        for _ in range(200):
            explanation = exact_shap(_nonlinear, rng.normal(size=6), bg)
            assert explanation.efficiency_gap <= 1e-9

    def test_dummy_and_symmetry(self):
        rng = np.random.default_rng(5)
        bg = BackgroundSet(rows=rng.normal(size=(10, 3)))

        def symmetric(X):
            return np.exp(-(X[:, 0] + X[:, 1]) ** 2)

        x = np.array([0.7, -0.3, 2.0])
        bg_symmetric = BackgroundSet(rows=np.column_stack([bg.rows[:, 0], bg.rows[:, 0], bg.rows[:, 2]]))
        explanation = exact_shap(symmetric, np.array([0.7, 0.7, 2.0]), bg_symmetric)
        assert explanation.phi[0] == pytest.approx(explanation.phi[1], abs=1e-12)
        assert explanation.phi[2] == pytest.approx(0.0, abs=1e-12)
        assert exact_shap(symmetric, x, bg).phi[2] == pytest.approx(0.0, abs=1e-12)

    def test_too_many_features(self):
        bg = BackgroundSet(rows=np.zeros((1, 21)))
        with pytest.raises(TooManyFeatures):
            exact_shap(lambda X: X[:, 0], np.zeros(21), bg)
        X = EncodedMatrix(values=np.zeros((2, 21)), feature_names=tuple(f"f{j}" for j in range(21)))
        with pytest.raises(TooManyFeatures):
            explain_rows(lambda X: X[:, 0], X, bg)

    def test_non_finite_output(self):
        bg = BackgroundSet(rows=np.zeros((2, 2)))
        with pytest.raises(NonFiniteModelOutput):
            exact_shap(lambda X: np.log(X[:, 0]), np.ones(2), bg)

    def test_background_sampling(self):
        X = EncodedMatrix(values=np.arange(40.0).reshape(20, 2), feature_names=("a", "b"))
        bg = make_background(X, 5, seed=3)
        assert bg.size == 5
        assert np.all(np.diff(bg.rows[:, 0]) > 0)
        np.testing.assert_array_equal(bg.rows, make_background(X, 5, seed=3).rows)
        assert make_background(X, 100, seed=3).size == 20


class TestRankingAndPayload:
    def _explanations(self, workers=1):
        rng = np.random.default_rng(6)
        names = ("age", "risk", "stage", "response")
        X = EncodedMatrix(values=rng.normal(size=(5, 4)), feature_names=names)
        bg = BackgroundSet(rows=rng.normal(size=(10, 4)), seed=1, feature_names=names)
        return explain_rows(_nonlinear, X, bg, workers=workers), bg

    def test_parallel_matches_serial(self):
        serial, _ = self._explanations()
        parallel, _ = self._explanations(workers=3)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.phi, b.phi)

    def test_ranking_is_sorted(self):
        explanations, _ = self._explanations()
        ranking = global_ranking(explanations)
        scores = [score for _, score in ranking]
        assert scores == sorted(scores, reverse=True)
        assert {name for name, _ in ranking} == {"age", "risk", "stage", "response"}

    def test_payload(self):
        explanations, bg = self._explanations()
        payload = explanations_to_dict(explanations, "bnn:normal:0:1:full", bg, [0, 1, 2, 3, 4])
        assert payload["background_size"] == 10
        assert payload["max_efficiency_gap"] <= 1e-9
        assert [e["row"] for e in payload["explanations"]] == [0, 1, 2, 3, 4]


class TestPlots:
    def _explanations(self):
        rng = np.random.default_rng(7)
        names = ("a", "b", "c", "d")
        X = EncodedMatrix(values=rng.normal(size=(6, 4)), feature_names=names)
        bg = BackgroundSet(rows=rng.normal(size=(8, 4)), feature_names=names)
        return explain_rows(_nonlinear, X, bg)

    def test_waterfall_ends_at_output(self):
        explanation = self._explanations()[0]
        steps = waterfall_layout(explanation)
        assert steps[0]["start"] == explanation.phi0
        assert steps[-1]["end"] == pytest.approx(explanation.fx, abs=1e-9)
        assert [abs(s["phi"]) for s in steps] == sorted((abs(s["phi"]) for s in steps), reverse=True)

    def test_decision_paths_end_at_output(self):
        explanations = self._explanations()
        order, paths = decision_layout(explanations)
        assert sorted(order) == [0, 1, 2, 3]
        for explanation, path in zip(explanations, paths):
            assert path[-1] == pytest.approx(explanation.fx, abs=1e-9)

    def test_svgs_are_well_formed(self):
        explanations = self._explanations()
        for svg in (
            render_bar(explanations),
            render_beeswarm(explanations, seed=2),
            render_decision(explanations),
            render_waterfall(explanations[1]),
        ):
            assert ET.fromstring(svg).tag.endswith("svg")

    def test_beeswarm_jitter_is_seeded(self):
        explanations = self._explanations()
        assert render_beeswarm(explanations, seed=2) == render_beeswarm(explanations, seed=2)

    def test_render_shap_writes_four_files(self, tmp_path):
        store = ArtifactStore(tmp_path)
        written = render_shap(self._explanations(), store, waterfall_instance=2, subtitle="test")
        assert sorted(p.name for p in written) == [
            "shap_bar.svg", "shap_beeswarm.svg", "shap_decision.svg", "shap_waterfall.svg"
        ]
        assert all(p.exists() for p in written)
        with pytest.raises(ValueError):
            render_shap(self._explanations(), store, waterfall_instance=6)
