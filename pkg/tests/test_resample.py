import numpy as np
import pytest

from uqtab.core.errors import TooFewMinority
from uqtab.modules.data.services import EncodedMatrix, LabelVector
from uqtab.modules.resample.services import SmoteConfig, nearest_minority_neighbors, smote


def _imbalanced(seed=0, negatives=40, positives=12, d=3):
    rng = np.random.default_rng(seed)
    values = np.vstack([rng.normal(0, 1, (negatives, d)), rng.normal(3, 1, (positives, d))])
    labels = np.array([0] * negatives + [1] * positives)
    return EncodedMatrix(values=values, feature_names=tuple(f"x{j}" for j in range(d))), LabelVector(labels)


def _on_segment(point, a, b, tol=1e-9):
    direction = b - a
    u = np.dot(point - a, direction) / np.dot(direction, direction)
    return -tol <= u <= 1 + tol and np.allclose(a + u * direction, point, atol=tol)


class TestSmote:
    def test_balances_classes(self):
        X, y = _imbalanced()
        X_res, y_res = smote(X, y, SmoteConfig(k_neighbors=5, seed=1))
        assert y_res.counts() == (40, 40)
        np.testing.assert_array_equal(X_res.values[: X.n], X.values)
        np.testing.assert_array_equal(y_res.labels[: y.n], y.labels)

    def test_target_ratio(self):
        X, y = _imbalanced()
        _, y_res = smote(X, y, SmoteConfig(k_neighbors=3, seed=1, target_ratio=0.5))
        assert y_res.counts() == (40, 20)

    def test_synthetics_lie_between_minority_neighbors(self):
        X, y = _imbalanced(seed=4)
        k = 4
        X_res, _ = smote(X, y, SmoteConfig(k_neighbors=k, seed=2))
        minority = X.values[y.labels == 1]
        neighbors = nearest_minority_neighbors(minority, k)
        for point in X_res.values[X.n:]:
            assert any(
                _on_segment(point, minority[i], minority[j])
                for i in range(minority.shape[0])
                for j in neighbors[i]
            )

    def test_deterministic_per_seed(self):
        X, y = _imbalanced()
        first, _ = smote(X, y, SmoteConfig(seed=5))
        second, _ = smote(X, y, SmoteConfig(seed=5))
        other, _ = smote(X, y, SmoteConfig(seed=6))
        np.testing.assert_array_equal(first.values, second.values)
        assert not np.array_equal(first.values, other.values)

    def test_metric_scale_matches_scaled_neighbors(self):
        X, y = _imbalanced(seed=8)
        scale = np.array([1.0, 10.0, 0.5])
        raw = X.values[y.labels == 1] * scale
        np.testing.assert_array_equal(
            nearest_minority_neighbors(raw, 3, scale),
            nearest_minority_neighbors(raw / scale, 3),
        )

    def test_too_few_minority(self):
        X, y = _imbalanced(positives=4)
        with pytest.raises(TooFewMinority):
            smote(X, y, SmoteConfig(k_neighbors=5))

    def test_single_class(self):
        X, _ = _imbalanced()
        with pytest.raises(TooFewMinority):
            smote(X, LabelVector(np.zeros(X.n, dtype=int)), SmoteConfig())
