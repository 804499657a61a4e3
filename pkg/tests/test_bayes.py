import math

import numpy as np
import pytest

from uqtab.core.artifacts import ArtifactStore
from uqtab.core.errors import AllDivergent, DimMismatch, NonFinite
from uqtab.modules.bayes.network import BnnParams, NetworkLayout, forward, forward_draws
from uqtab.modules.bayes.nuts import (
    NutsConfig,
    adaptation_windows,
    kinetic_energy,
    leapfrog,
    nuts_sample,
    split_rhat,
)
from uqtab.modules.bayes.plots import render_uncertainty
from uqtab.modules.bayes.posterior import BnnPosterior
from uqtab.modules.bayes.priors import SHIPPED_PRIORS, parse_prior
from uqtab.modules.bayes.services import (
    PredictiveDraws,
    evaluate_bnn,
    load_posterior,
    posterior_name,
    posterior_predict,
    sample_bnn,
    save_posterior,
    thin,
    uncertainty,
)
from uqtab.modules.data.services import EncodedMatrix, LabelVector


def standard_normal(theta):
    return -0.5 * float(theta @ theta), -theta


def _toy_data(n=40, d=3, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, d))
    labels = (values[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    return EncodedMatrix(values=values, feature_names=tuple(f"x{j}" for j in range(d))), LabelVector(labels)


class TestPriors:
    def test_laplace_value(self):
        prior = parse_prior("laplace:0:1")
        assert prior.log_density(np.array([2.0])) == pytest.approx(-2.0 - math.log(2.0))

    def test_cauchy_value_and_gradient(self):
        assert parse_prior("cauchy:0:2.5").log_density(np.array([0.0])) == pytest.approx(-math.log(2.5 * math.pi))
        assert parse_prior("cauchy:0:1").grad_log_density(np.array([1.0]))[0] == pytest.approx(-1.0)

    def test_normal_value(self):
        prior = parse_prior("normal:0:10")
        expected = -0.5 * math.log(2 * math.pi * 100) - 9.0 / 200
        assert prior.log_density(np.array([3.0])) == pytest.approx(expected)

    def test_parse(self):
        horseshoe = parse_prior("horseshoe:1")
        assert horseshoe.is_horseshoe and horseshoe.scale == 1.0
        assert parse_prior("cauchy:0:2.5").heavy_tailed
        for text in ("gamma:0:1", "normal:0", "normal:0:-1", "laplace:a:1"):
            with pytest.raises(ValueError):
                parse_prior(text)


class TestNetwork:
    def test_layout_dimensions(self):
        layout = NetworkLayout(d=7)
        assert layout.n_weights == 5 * 7 + 11
        assert layout.dim(horseshoe=True) == 2 * layout.n_weights
        assert len(layout.parameter_names(horseshoe=True)) == layout.dim(horseshoe=True)

    def test_zero_weights_give_one_half(self):
        layout = NetworkLayout(d=4)
        params = layout.unpack(np.zeros(layout.n_weights))
        np.testing.assert_allclose(forward(params, np.ones((3, 4))), 0.5)

    def test_hand_computed_output(self):
        params = BnnParams(W1=np.array([[1.0]]), b1=np.array([0.0]), W2=np.array([2.0]), b2=0.0)
        assert float(forward(params, np.array([1.0]))) == pytest.approx(1 / (1 + math.exp(-2)))
        # relu cuts the negative input
        assert float(forward(params, np.array([-1.0]))) == pytest.approx(0.5)

    def test_output_is_clamped(self):
        params = BnnParams(W1=np.array([[1.0]]), b1=np.array([0.0]), W2=np.array([1e4]), b2=0.0)
        assert float(forward(params, np.array([1.0]))) == 1.0 - 1e-12

    def test_dim_mismatch(self):
        layout = NetworkLayout(d=3)
        with pytest.raises(DimMismatch):
            forward(layout.unpack(np.zeros(layout.n_weights)), np.zeros(4))
        with pytest.raises(DimMismatch):
            forward_draws(layout, np.zeros((2, layout.n_weights)), np.zeros((5, 2)))

    def test_batched_matches_single(self):
        layout = NetworkLayout(d=3, hidden=4)
        rng = np.random.default_rng(1)
        weights = rng.normal(size=(3, layout.n_weights))
        X = rng.normal(size=(6, 3))
        batched = forward_draws(layout, weights, X)
        for s in range(3):
            np.testing.assert_allclose(batched[s], forward(layout.unpack(weights[s]), X))


class TestPosterior:
    def _finite_difference(self, target, theta, h=1e-5):
        grad = np.empty_like(theta)
        for i in range(theta.size):
            step = np.zeros_like(theta)
            step[i] = h
            grad[i] = (target.log_joint(theta + step) - target.log_joint(theta - step)) / (2 * h)
        return grad

    def _smooth_point(self, target, rng, scale=0.5):
        """A random point away from the relu, laplace and clamp kinks"""
        while True:
            theta = rng.normal(0.0, scale, size=target.dim)
            params = target.params(theta)
            pre = target.X @ params.W1.T + params.b1
            logit = np.maximum(pre, 0.0) @ params.W2 + params.b2
            if np.min(np.abs(pre)) < 1e-3 or np.max(np.abs(logit)) > 20:
                continue
            if target.prior.family == "laplace" and np.min(np.abs(theta - target.prior.location)) < 1e-3:
                continue
            return theta

    @pytest.mark.parametrize("point_seed", range(100))
    @pytest.mark.parametrize("prior_text", SHIPPED_PRIORS)
    def test_gradient_matches_finite_differences(self, prior_text, point_seed):
        X, y = _toy_data(n=30, d=7, seed=2)
        target = BnnPosterior(X.values, y.labels, parse_prior(prior_text), NetworkLayout(d=7))
        theta = self._smooth_point(target, np.random.default_rng(point_seed))
        analytic = target.grad_log_joint(theta)
        numeric = self._finite_difference(target, theta)
        assert np.all(np.abs(analytic - numeric) <= 1e-5 * np.maximum(1.0, np.abs(numeric)))

    def test_call_returns_value_and_gradient(self):
        X, y = _toy_data()
        target = BnnPosterior(X.values, y.labels, parse_prior("normal:0:1"), NetworkLayout(d=3))
        theta = np.full(target.dim, 0.1)
        value, grad = target(theta)
        assert value == target.log_joint(theta)
        np.testing.assert_array_equal(grad, target.grad_log_joint(theta))

    def test_horseshoe_weights_are_reconstituted(self):
        layout = NetworkLayout(d=2, hidden=2)
        X, y = _toy_data(d=2)
        target = BnnPosterior(X.values, y.labels, parse_prior("horseshoe:0.5"), layout)
        theta = np.concatenate([np.full(layout.n_weights, 2.0), np.zeros(layout.n_weights)])
        np.testing.assert_allclose(target.weights(theta), 1.0)

    def test_shape_errors(self):
        X, y = _toy_data()
        target = BnnPosterior(X.values, y.labels, parse_prior("normal:0:1"), NetworkLayout(d=3))
        with pytest.raises(DimMismatch):
            target.log_joint(np.zeros(target.dim + 1))
        with pytest.raises(DimMismatch):
            BnnPosterior(X.values, y.labels[:-1], parse_prior("normal:0:1"), NetworkLayout(d=3))

    def test_overflowing_horseshoe_scale_is_non_finite(self):
        layout = NetworkLayout(d=3)
        X, y = _toy_data()
        target = BnnPosterior(X.values, y.labels, parse_prior("horseshoe:1"), layout)
        theta = np.concatenate([np.ones(layout.n_weights), np.full(layout.n_weights, 800.0)])
        with pytest.raises(NonFinite):
            target(theta)


class TestSampler:
    def test_leapfrog_conserves_energy(self):
        theta = np.array([1.0, -0.5])
        r = np.array([0.3, 0.8])
        inv_metric = np.ones(2)
        logp, grad = standard_normal(theta)
        start = -logp + kinetic_energy(r, inv_metric)
        for _ in range(200):
            theta, r, grad, logp = leapfrog(theta, r, grad, 0.05, inv_metric, standard_normal)
        assert abs(-logp + kinetic_energy(r, inv_metric) - start) < 1e-2

    def test_deterministic_and_parallel_safe(self):
        cfg = NutsConfig(warmup=50, draws=30, chains=2, seed=4)
        serial = nuts_sample(standard_normal, np.zeros(3), cfg)
        again = nuts_sample(standard_normal, np.zeros(3), cfg)
        parallel = nuts_sample(standard_normal, np.zeros(3), cfg, workers=2)
        np.testing.assert_array_equal(serial.samples, again.samples)
        np.testing.assert_array_equal(serial.samples, parallel.samples)
        assert serial.samples.shape == (60, 3)

    @pytest.mark.slow
    def test_standard_normal_moments(self):
        cfg = NutsConfig(warmup=500, draws=2000, chains=2, seed=1)
        result = nuts_sample(standard_normal, np.zeros(5), cfg)
        np.testing.assert_allclose(result.samples.mean(axis=0), 0.0, atol=0.05)
        np.testing.assert_allclose(result.samples.var(axis=0), 1.0, atol=0.1)
        assert result.total_divergences == 0
        assert result.max_split_rhat < 1.05

    @pytest.mark.slow
    def test_correlated_gaussian(self):
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        precision = np.linalg.inv(cov)

        def target(theta):
            return -0.5 * float(theta @ precision @ theta), -precision @ theta

        result = nuts_sample(target, np.zeros(2), NutsConfig(warmup=500, draws=4000, chains=2, seed=2))
        np.testing.assert_allclose(np.cov(result.samples.T), cov, atol=0.1)

    def test_all_divergent(self):
        def only_origin(theta):
            if np.any(theta != 0.0):
                raise NonFinite("off the origin")
            return 0.0, np.zeros_like(theta)

        with pytest.raises(AllDivergent) as info:
            nuts_sample(only_origin, np.zeros(2), NutsConfig(warmup=0, draws=20, chains=2))
        assert info.value.diagnostics["total_divergences"] == 40

    def test_init_validation(self):
        cfg = NutsConfig(warmup=5, draws=5, chains=2)
        with pytest.raises(ValueError):
            nuts_sample(standard_normal, np.zeros((3, 2)), cfg)
        with pytest.raises(ValueError):
            nuts_sample(standard_normal, np.array([np.nan, 0.0]), cfg)
        with pytest.raises(ValueError):
            NutsConfig(target_accept=1.0)

    def test_split_rhat(self):
        rng = np.random.default_rng(0)
        mixed = [rng.normal(size=(200, 2)) for _ in range(2)]
        assert split_rhat(mixed) < 1.05
        stuck = [rng.normal(size=(200, 2)), rng.normal(5.0, 1.0, size=(200, 2))]
        assert split_rhat(stuck) > 1.5
        assert split_rhat([np.zeros((3, 2))]) is None

    def test_adaptation_windows(self):
        windows = adaptation_windows(1000)
        assert windows[0][0] == 75
        assert windows[-1][1] == 950
        assert all(a[1] == b[0] for a, b in zip(windows, windows[1:]))
        assert adaptation_windows(10) == []


class TestUncertainty:
    def test_decomposition_identity(self):
        probs = np.random.default_rng(3).uniform(size=(50, 20))
        report = uncertainty(PredictiveDraws(probs))
        np.testing.assert_allclose(report.epistemic + report.aleatoric, report.mean * (1 - report.mean), atol=1e-12)
        assert np.all(report.epistemic >= 0) and np.all(report.aleatoric >= 0)

    def test_band_width(self):
        report = uncertainty(PredictiveDraws(np.array([[0.2, 0.9], [0.4, 0.9]])))
        np.testing.assert_allclose(report.band("epistemic", "sd"), [0.1, 0.0])
        np.testing.assert_allclose(report.band("epistemic", "90"), [0.1645, 0.0])

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            uncertainty(PredictiveDraws(np.array([[0.5, 0.5]])))

    def test_render(self):
        report = uncertainty(PredictiveDraws(np.random.default_rng(0).uniform(size=(10, 6))))
        svg = render_uncertainty(report, "aleatoric", "Aleatoric", labels=np.array([0, 1, 0, 1, 1, 0]))
        assert "<svg" in svg
        with pytest.raises(ValueError):
            render_uncertainty(report, "total", "Total")


class TestSampleBnn:
    @pytest.fixture
    def sampled(self, small_nuts):
        X, y = _toy_data()
        cfg = NutsConfig(seed=3, **small_nuts)
        return X, y, sample_bnn(X, y, parse_prior("normal:0:1"), cfg)

    def test_shapes_and_meta(self, sampled):
        X, _, samples = sampled
        assert samples.samples.shape == (80, 5 * 3 + 11)
        assert samples.meta["feature_names"] == list(X.feature_names)
        assert posterior_predict(samples, X).probs.shape == (80, X.n)

    def test_learns_the_signal(self, sampled):
        X, y, samples = sampled
        assert evaluate_bnn(samples, X, y).accuracy >= 0.7

    def test_deterministic(self, sampled, small_nuts):
        X, y, samples = sampled
        again = sample_bnn(X, y, parse_prior("normal:0:1"), NutsConfig(seed=3, **small_nuts))
        np.testing.assert_array_equal(samples.samples, again.samples)

    def test_horseshoe_dimension(self, small_nuts):
        X, y = _toy_data()
        cfg = NutsConfig(seed=1, **{**small_nuts, "warmup": 20, "draws": 10})
        samples = sample_bnn(X, y, parse_prior("horseshoe:1"), cfg)
        assert samples.dim == 2 * (5 * 3 + 11)
        probs = posterior_predict(samples, X).probs
        assert probs.shape == (20, X.n)

    def test_save_and_load(self, sampled, tmp_path):
        X, _, samples = sampled
        store = ArtifactStore(tmp_path)
        name = posterior_name(samples.prior, "full")
        save_posterior(store, name, samples)
        restored = load_posterior(store, name)
        np.testing.assert_array_equal(restored.samples, samples.samples)
        assert restored.prior == samples.prior
        assert restored.total_divergences == samples.total_divergences
        np.testing.assert_array_equal(posterior_predict(restored, X).probs, posterior_predict(samples, X).probs)

    def test_thin(self, sampled):
        _, _, samples = sampled
        thinned = thin(samples, 20)
        assert thinned.samples.shape[0] == 20
        np.testing.assert_array_equal(thinned.samples[0], samples.samples[0])
        np.testing.assert_array_equal(thinned.samples[-1], samples.samples[-1])
        assert thin(samples, 500) is samples

    def test_feature_names_must_match(self, sampled):
        X, _, samples = sampled
        renamed = EncodedMatrix(values=X.values, feature_names=("a", "b", "c"))
        with pytest.raises(DimMismatch):
            posterior_predict(samples, renamed)
