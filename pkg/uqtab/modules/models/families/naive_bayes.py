"""
Gaussian naive Bayes with variance smoothing
"""

import numpy as np
from scipy.special import expit

from uqtab.modules.models.families.base import ClassifierFamily, NaiveBayesParams, TrainedClassifier

VARIANCE_FLOOR = 1e-12


class NaiveBayesModel(TrainedClassifier):
    """
    Per-class feature means/variances and class priors
    A class absent from training gets prior 0
    """

    family = ClassifierFamily.NAIVE_BAYES

    def __init__(self, hp: NaiveBayesParams, feature_names, priors: np.ndarray, means: np.ndarray, variances: np.ndarray):
        super().__init__(hp, feature_names)
        self.priors = priors
        self.means = means
        self.variances = variances

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        """n x 2 matrix of log p(c) + sum_j log N(x_j | mu_cj, var_cj)"""
        jll = np.full((X.shape[0], 2), -np.inf)
        for c in (0, 1):
            if self.priors[c] == 0:
                continue
            var = self.variances[c]
            jll[:, c] = (
                np.log(self.priors[c])
                - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            )
        return jll

    def _proba(self, X: np.ndarray) -> np.ndarray:
        if self.priors[1] == 0:
            return np.zeros(X.shape[0])
        if self.priors[0] == 0:
            return np.ones(X.shape[0])
        jll = self.joint_log_likelihood(X)
        return expit(jll[:, 1] - jll[:, 0])

    @property
    def n_parameters(self) -> int:
        return 4 * len(self.feature_names) + 2


def fit(hp: NaiveBayesParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> NaiveBayesModel:
    y = np.asarray(y).astype(int)
    d = X.shape[1]
    epsilon = hp.var_smoothing * float(np.max(np.var(X, axis=0))) if X.shape[0] else 0.0
    epsilon = max(epsilon, VARIANCE_FLOOR)

    priors = np.zeros(2)
    means = np.zeros((2, d))
    variances = np.ones((2, d))
    for c in (0, 1):
        rows = X[y == c]
        if rows.shape[0] == 0:
            continue
        priors[c] = rows.shape[0] / X.shape[0]
        means[c] = rows.mean(axis=0)
        variances[c] = rows.var(axis=0) + epsilon
    return NaiveBayesModel(hp, feature_names, priors, means, variances)
