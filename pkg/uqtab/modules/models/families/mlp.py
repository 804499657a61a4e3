"""
One-hidden-layer perceptron: ReLU hidden units, sigmoid output,
cross-entropy loss, Adam on seeded minibatches for a fixed number of epochs
"""

import logging

import numpy as np
from scipy.special import expit

from uqtab.core.errors import NonConvergence
from uqtab.modules.models.families.base import ClassifierFamily, MlpParams, TrainedClassifier

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


class MlpModel(TrainedClassifier):
    family = ClassifierFamily.MLP

    def __init__(self, hp: MlpParams, feature_names, W1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: float, epochs_run: int):
        super().__init__(hp, feature_names)
        self.W1 = W1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2
        self.epochs_run = epochs_run

    def _logit(self, X: np.ndarray) -> np.ndarray:
        return np.maximum(X @ self.W1.T + self.b1, 0.0) @ self.w2 + self.b2

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self._logit(X))

    @property
    def n_parameters(self) -> int:
        h = self.hp.hidden_units
        return h * (len(self.feature_names) + 2) + 1


def fit(hp: MlpParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> MlpModel:
    n, d = X.shape
    h = hp.hidden_units
    y = np.asarray(y, dtype=float)

    # He initialization for the ReLU layer
    params = {
        "W1": rng.normal(0.0, np.sqrt(2.0 / d), size=(h, d)),
        "b1": np.zeros(h),
        "w2": rng.normal(0.0, np.sqrt(1.0 / h), size=h),
        "b2": np.zeros(1),
    }
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(val) for k, val in params.items()}
    step = 0

    def snapshot(state, epochs: int) -> MlpModel:
        return MlpModel(
            hp, feature_names,
            state["W1"].copy(), state["b1"].copy(), state["w2"].copy(), float(state["b2"][0]), epochs,
        )

    for epoch in range(1, hp.epochs + 1):
        last_finite = {k: val.copy() for k, val in params.items()}
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hp.batch_size):
            rows = order[start:start + hp.batch_size]
            xb, yb = X[rows], y[rows]

            pre = xb @ params["W1"].T + params["b1"]
            hidden = np.maximum(pre, 0.0)
            logit = hidden @ params["w2"] + params["b2"][0]
            epoch_loss += float(np.sum(np.logaddexp(0.0, logit) - yb * logit))

            dlogit = (expit(logit) - yb) / rows.size
            dhidden = np.outer(dlogit, params["w2"]) * (pre > 0)
            grads = {
                "W1": dhidden.T @ xb,
                "b1": dhidden.sum(axis=0),
                "w2": hidden.T @ dlogit,
                "b2": np.array([dlogit.sum()]),
            }

            step += 1
            for key in params:
                m[key] = BETA1 * m[key] + (1 - BETA1) * grads[key]
                v[key] = BETA2 * v[key] + (1 - BETA2) * grads[key] ** 2
                m_hat = m[key] / (1 - BETA1 ** step)
                v_hat = v[key] / (1 - BETA2 ** step)
                params[key] = params[key] - hp.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

        if not np.isfinite(epoch_loss):
            raise NonConvergence(ClassifierFamily.MLP.value, epoch, snapshot(last_finite, epoch - 1))

    logger.debug(f"MLP: {hp.epochs} epochs, final mean loss {epoch_loss / n:.4f}")
    return snapshot(params, hp.epochs)
