"""
Unnormalized log posterior of the network and its gradient
Bernoulli likelihood on the clamped sigmoid output plus the prior over every
weight and bias. The horseshoe is sampled non-centered: w = z * exp(eta) * tau
with z ~ N(0, 1) and exp(eta) ~ Half-Cauchy(0, 1).
"""

from typing import Tuple

import numpy as np
from scipy.special import expit

from uqtab.core.errors import DimMismatch, NonFinite
from uqtab.modules.bayes.network import PROB_EPS, BnnParams, NetworkLayout
from uqtab.modules.bayes.priors import PriorSpec


class BnnPosterior:
    """
    Target density for the sampler over the unconstrained vector theta
    Calling the instance returns (log_joint, grad_log_joint)
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, prior: PriorSpec, layout: NetworkLayout):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            X = X.reshape(-1, layout.d)
        if X.shape[1] != layout.d:
            raise DimMismatch(f"network has {layout.d} inputs, data has {X.shape[1]} columns")
        y = np.asarray(getattr(y, "labels", y), dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise DimMismatch(f"{X.shape[0]} rows but {y.shape[0]} labels")
        self.X = X
        self.y = y
        self.prior = prior
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.dim(self.prior.is_horseshoe)

    def weights(self, theta: np.ndarray) -> np.ndarray:
        """Network weights for a sampled vector (reconstituted for the horseshoe)"""
        theta = self._check(theta)
        if not self.prior.is_horseshoe:
            return theta
        p = self.layout.n_weights
        with np.errstate(over="ignore", invalid="ignore"):
            return theta[:p] * np.exp(theta[p:]) * self.prior.scale

    def params(self, theta: np.ndarray) -> BnnParams:
        unpacked = self.layout.unpack(self.weights(theta))
        if self.prior.is_horseshoe:
            return BnnParams(unpacked.W1, unpacked.b1, unpacked.W2, unpacked.b2, aux=theta[self.layout.n_weights:])
        return unpacked

    def _check(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise DimMismatch(f"expected parameter vector of length {self.dim}, got {theta.shape}")
        return theta

    def _likelihood(self, w: np.ndarray, with_grad: bool):
        """Log likelihood and its gradient with respect to the network weights"""
        layout = self.layout
        h, d = layout.hidden, layout.d
        cut = h * d
        W1 = w[:cut].reshape(h, d)
        b1 = w[cut:cut + h]
        W2 = w[cut + h:cut + 2 * h]
        b2 = w[-1]

        with np.errstate(over="ignore", invalid="ignore"):
            pre = self.X @ W1.T + b1
            hidden = np.maximum(pre, 0.0)
            logit = hidden @ W2 + b2
            raw = expit(logit)
            p = np.clip(raw, PROB_EPS, 1.0 - PROB_EPS)
            value = float(np.sum(self.y * np.log(p) + (1.0 - self.y) * np.log1p(-p)))
        if not with_grad:
            return value, None

        # flat outside the clamp
        inside = (raw > PROB_EPS) & (raw < 1.0 - PROB_EPS)
        g = np.where(inside, self.y - p, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            d_pre = np.outer(g, W2) * (pre > 0)
            grad = np.concatenate([
                (d_pre.T @ self.X).ravel(),
                d_pre.sum(axis=0),
                hidden.T @ g,
                [g.sum()],
            ])
        return value, grad

    def log_joint(self, theta: np.ndarray) -> float:
        """
        Log likelihood plus log prior (unnormalized)
        Raises:
            NonFinite: If any term is NaN or infinite
        """
        value, _ = self._evaluate(theta, with_grad=False)
        return value

    def grad_log_joint(self, theta: np.ndarray) -> np.ndarray:
        """
        Reverse-mode gradient with respect to theta; ReLU subgradient 0 at 0
        Raises:
            NonFinite: If any component is NaN or infinite
        """
        _, grad = self._evaluate(theta, with_grad=True)
        return grad

    def __call__(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return self._evaluate(theta, with_grad=True)

    def _evaluate(self, theta: np.ndarray, with_grad: bool):
        theta = self._check(theta)
        prior = self.prior

        if prior.is_horseshoe:
            p = self.layout.n_weights
            z, eta = theta[:p], theta[p:]
            with np.errstate(over="ignore", invalid="ignore"):
                local = np.exp(eta) * prior.scale
                w = z * local
            ll, dll = self._likelihood(w, with_grad)
            value = ll + prior.log_density(z) + prior.log_density_log_scale(eta)
            grad = None
            if with_grad:
                with np.errstate(over="ignore", invalid="ignore"):
                    grad = np.concatenate([
                        dll * local + prior.grad_log_density(z),
                        dll * w + prior.grad_log_density_log_scale(eta),
                    ])
        else:
            ll, dll = self._likelihood(theta, with_grad)
            value = ll + prior.log_density(theta)
            grad = dll + prior.grad_log_density(theta) if with_grad else None

        if not np.isfinite(value):
            raise NonFinite(f"log joint evaluated to {value}")
        if grad is not None and not np.all(np.isfinite(grad)):
            raise NonFinite("gradient of the log joint is not finite")
        return value, grad
