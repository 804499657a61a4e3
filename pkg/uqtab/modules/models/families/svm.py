"""
Support vector machine trained with SMO
Working pairs are the maximal violating pair over the dual gradient; the
solver stops when the violation drops below tol or after max_iter updates.
Probability is the logistic link of the decision value.
"""

import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from uqtab.modules.models.families.base import ClassifierFamily, SvmParams, TrainedClassifier

logger = logging.getLogger(__name__)

TAU = 1e-12
ALPHA_EPS = 1e-12
# post-fit KKT margins are checked at this multiple of the solver tol
KKT_SLACK = 10.0


def default_gamma(X: np.ndarray) -> float:
    """1 / (d * var(X)) over all entries; 1.0 for a constant matrix"""
    variance = float(np.var(X))
    return 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        - 2.0 * A @ B.T
        + np.sum(B * B, axis=1)[None, :]
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SvmModel(TrainedClassifier):
    family = ClassifierFamily.SVM

    def __init__(
        self,
        hp: SvmParams,
        feature_names,
        support_vectors: np.ndarray,
        dual_coef: np.ndarray,
        rho: float,
        gamma: float,
        iterations: int,
        violation: float,
        kkt_violation_count: int = 0,
    ):
        super().__init__(hp, feature_names)
        self.support_vectors = support_vectors
        self.dual_coef = dual_coef  # alpha_i * y_i
        self.rho = rho
        self.gamma = gamma
        self.iterations = iterations
        self.violation = violation
        self.kkt_violation_count = kkt_violation_count

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = self.check_input(X)
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], -self.rho)
        K = kernel_matrix(X, self.support_vectors, self.hp.kernel, self.gamma)
        return K @ self.dual_coef - self.rho

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    @property
    def n_support(self) -> int:
        return int(self.support_vectors.shape[0])

    @property
    def n_parameters(self) -> int:
        return self.n_support * (len(self.feature_names) + 1) + 1


def _select_pair(alpha: np.ndarray, G: np.ndarray, y: np.ndarray, C: float):
    """Maximal violating pair (i, j) and the violation m - M"""
    minus_yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    up_idx = np.flatnonzero(up)
    low_idx = np.flatnonzero(low)
    i = int(up_idx[np.argmax(minus_yG[up_idx])])
    j = int(low_idx[np.argmin(minus_yG[low_idx])])
    return i, j, float(minus_yG[i] - minus_yG[j])


def _compute_rho(alpha: np.ndarray, G: np.ndarray, y: np.ndarray, C: float) -> float:
    """Mean of y*G over free vectors; midpoint of the feasible interval when none is free"""
    yG = y * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~(upper | lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = float(yG[ub_mask].min()) if ub_mask.any() else np.inf
    lb = float(yG[lb_mask].max()) if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return lb
    if not np.isfinite(lb):
        return ub
    return 0.5 * (ub + lb)


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """
    Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q = (y y') * K
    Returns:
        (alpha, rho, iterations, final violation)
    """
    n = y.shape[0]
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)

    iterations = 0
    violation = np.inf
    while iterations < max_iter:
        i, j, violation = _select_pair(alpha, G, y, C)
        if i < 0 or violation < tol:
            break
        iterations += 1
        old_i, old_j = alpha[i], alpha[j]

        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        G += Q[i] * (alpha[i] - old_i) + Q[j] * (alpha[j] - old_j)
    else:
        _, _, violation = _select_pair(alpha, G, y, C)

    return alpha, _compute_rho(alpha, G, y, C), iterations, violation


def kkt_violations(alpha: np.ndarray, y: np.ndarray, K: np.ndarray, rho: float, C: float, tol: float) -> np.ndarray:
    """
    Indices breaking the box KKT conditions on y f(x):
    alpha = 0 needs >= 1 - tol, 0 < alpha < C needs |y f - 1| <= tol,
    alpha = C needs <= 1 + tol
    """
    margin = y * (K @ (alpha * y) - rho)
    at_zero = alpha <= ALPHA_EPS
    at_c = alpha >= C - ALPHA_EPS
    free = ~(at_zero | at_c)
    bad = (at_zero & (margin < 1 - tol)) | (at_c & (margin > 1 + tol)) | (free & (np.abs(margin - 1) > tol))
    return np.flatnonzero(bad)


def fit(hp: SvmParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> SvmModel:
    signed = np.where(np.asarray(y) > 0, 1.0, -1.0)
    gamma: Optional[float] = hp.gamma if hp.gamma is not None else default_gamma(X)
    K = kernel_matrix(X, X, hp.kernel, gamma)
    alpha, rho, iterations, violation = smo(K, signed, hp.C, hp.tol, hp.max_iter)
    if violation >= hp.tol:
        logger.warning(
            f"SVM reached {hp.max_iter} SMO iterations (C={hp.C}, kernel={hp.kernel}); "
            f"violation {violation:.2e}, keeping last state"
        )
    violators = kkt_violations(alpha, signed, K, rho, hp.C, KKT_SLACK * hp.tol)
    if violators.size:
        logger.warning(
            f"SVM: {violators.size} of {signed.size} training rows break the KKT conditions "
            f"by more than {KKT_SLACK * hp.tol:.1e} (C={hp.C}, kernel={hp.kernel})"
        )

    support = alpha > ALPHA_EPS
    logger.debug(f"SVM: {int(support.sum())} support vectors after {iterations} iterations")
    return SvmModel(
        hp,
        feature_names,
        support_vectors=np.array(X[support], dtype=float),
        dual_coef=alpha[support] * signed[support],
        rho=rho,
        gamma=gamma,
        iterations=iterations,
        violation=violation,
        kkt_violation_count=int(violators.size),
    )
