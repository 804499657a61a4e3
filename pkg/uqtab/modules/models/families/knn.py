"""
k-nearest neighbors, Euclidean distance
proba = fraction of class-1 labels among the k nearest training rows;
distance ties go to the lower training index
"""

import numpy as np

from uqtab.modules.models.families.base import ClassifierFamily, KnnParams, TrainedClassifier


class KnnModel(TrainedClassifier):
    family = ClassifierFamily.KNN

    def __init__(self, hp: KnnParams, feature_names, X_train: np.ndarray, y_train: np.ndarray):
        super().__init__(hp, feature_names)
        self.X_train = X_train
        self.y_train = y_train

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows per query row"""
        k = min(self.hp.k, self.X_train.shape[0])
        dist = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ self.X_train.T
            + np.sum(self.X_train * self.X_train, axis=1)[None, :]
        )
        dist = np.maximum(dist, 0.0)
        return np.argsort(dist, axis=1, kind="stable")[:, :k]

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return self.y_train[self.neighbors(X)].mean(axis=1)

    @property
    def n_parameters(self) -> int:
        return int(self.X_train.size)


def fit(hp: KnnParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> KnnModel:
    return KnnModel(hp, feature_names, np.array(X, dtype=float), np.asarray(y, dtype=float))
