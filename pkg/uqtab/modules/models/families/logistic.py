"""
L2-regularized logistic regression
Full-batch gradient descent on the mean negative log-likelihood with
Armijo backtracking; stops when the gradient norm drops below tol
"""

import logging

import numpy as np
from scipy.special import expit

from uqtab.core.errors import NonConvergence
from uqtab.modules.models.families.base import ClassifierFamily, LogisticParams, TrainedClassifier

logger = logging.getLogger(__name__)

ARMIJO_C = 0.5
MIN_STEP = 1e-20


class LogisticModel(TrainedClassifier):
    family = ClassifierFamily.LOGISTIC

    def __init__(self, hp: LogisticParams, feature_names, weights: np.ndarray, bias: float, iterations: int, converged: bool):
        super().__init__(hp, feature_names)
        self.weights = weights
        self.bias = bias
        self.iterations = iterations
        self.converged = converged

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.check_input(X) @ self.weights + self.bias

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return expit(X @ self.weights + self.bias)

    @property
    def n_parameters(self) -> int:
        return len(self.feature_names) + 1


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2_lambda: float) -> float:
    """mean(log(1 + e^z) - y z) + lambda/2 |w|^2"""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (w @ w))


def gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2_lambda: float):
    residual = expit(X @ w + b) - y
    return X.T @ residual / X.shape[0] + l2_lambda * w, float(residual.mean())


def fit(hp: LogisticParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> LogisticModel:
    y = np.asarray(y, dtype=float)
    w = np.zeros(X.shape[1])
    b = 0.0
    f = objective(w, b, X, y, hp.l2_lambda)
    step = 1.0
    converged = False

    iteration = 0
    for iteration in range(1, hp.max_iter + 1):
        gw, gb = gradient(w, b, X, y, hp.l2_lambda)
        sq_norm = float(gw @ gw + gb * gb)
        if np.sqrt(sq_norm) < hp.tol:
            converged = True
            break

        t = step
        while True:
            w_new = w - t * gw
            b_new = b - t * gb
            f_new = objective(w_new, b_new, X, y, hp.l2_lambda)
            if not (np.isfinite(f_new) and np.all(np.isfinite(w_new))):
                partial = LogisticModel(hp, feature_names, w, b, iteration, False)
                raise NonConvergence(ClassifierFamily.LOGISTIC.value, iteration, partial)
            if f_new <= f - ARMIJO_C * t * sq_norm or t < MIN_STEP:
                break
            t *= 0.5

        if t < MIN_STEP:
            # no representable descent step left
            converged = True
            break
        w, b, f = w_new, b_new, f_new
        step = min(2.0 * t, 1e3)

    if not converged:
        logger.warning(f"LOGISTIC reached {hp.max_iter} iterations (lambda={hp.l2_lambda}); keeping last state")
    else:
        logger.debug(f"LOGISTIC converged after {iteration} iterations")
    return LogisticModel(hp, feature_names, w, b, iteration, converged)
