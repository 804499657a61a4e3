"""
One-hidden-layer Bayesian network: parameter layout and forward pass
The flat parameter vector is [W1 (hidden x d, row-major), b1, W2, b2]
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import expit

from uqtab.core.errors import DimMismatch

PROB_EPS = 1e-12


def clamp_probability(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(frozen=True)
class NetworkLayout:
    """Shapes of a d-input, `hidden`-unit, single-logit network"""

    d: int
    hidden: int = 5

    def __post_init__(self):
        if self.d < 1 or self.hidden < 1:
            raise ValueError("network needs d >= 1 and hidden >= 1")

    @property
    def n_weights(self) -> int:
        """hidden*d + hidden + hidden + 1 (5d + 11 for five hidden units)"""
        return self.hidden * (self.d + 2) + 1

    def dim(self, horseshoe: bool = False) -> int:
        """Sampled dimension; the horseshoe adds one log local scale per weight"""
        return 2 * self.n_weights if horseshoe else self.n_weights

    def parameter_names(self, horseshoe: bool = False) -> List[str]:
        names = [f"W1[{i},{j}]" for i in range(self.hidden) for j in range(self.d)]
        names += [f"b1[{i}]" for i in range(self.hidden)]
        names += [f"W2[{i}]" for i in range(self.hidden)]
        names.append("b2")
        if horseshoe:
            return [f"z:{n}" for n in names] + [f"eta:{n}" for n in names]
        return names

    def unpack(self, weights: np.ndarray) -> "BnnParams":
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.n_weights,):
            raise DimMismatch(f"expected {self.n_weights} network weights, got {weights.shape}")
        h, d = self.hidden, self.d
        cut = h * d
        return BnnParams(
            W1=weights[:cut].reshape(h, d),
            b1=weights[cut:cut + h],
            W2=weights[cut + h:cut + 2 * h],
            b2=float(weights[-1]),
        )


@dataclass(frozen=True)
class BnnParams:
    """
    Network weights; aux holds the log local scales under the horseshoe
    (W1, b1, W2, b2 are then the reconstituted weights)
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    aux: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return int(self.W1.shape[1])

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])


def forward(params: BnnParams, x: np.ndarray) -> np.ndarray:
    """
    p = sigmoid(W2 . relu(W1 x + b1) + b2), clamped to [1e-12, 1 - 1e-12]
    Args:
        params: Network weights
        x: One feature vector (d,) or a matrix (m, d)
    Returns:
        Probability (scalar array for a vector input, (m,) for a matrix)
    Raises:
        DimMismatch: If x does not have d columns
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.d:
        raise DimMismatch(f"network expects {params.d} features, got {x.shape[-1]}")
    hidden = np.maximum(x @ params.W1.T + params.b1, 0.0)
    return clamp_probability(expit(hidden @ params.W2 + params.b2))


def forward_draws(layout: NetworkLayout, weights: np.ndarray, X: np.ndarray) -> np.ndarray:
    """
    Forward pass for many weight vectors at once
    Args:
        layout: Network shapes
        weights: (S, n_weights) reconstituted weights
        X: (m, d) inputs
    Returns:
        (S, m) probabilities
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != layout.d:
        raise DimMismatch(f"network expects {layout.d} features, got shape {X.shape}")
    h, d = layout.hidden, layout.d
    cut = h * d
    W1 = weights[:, :cut].reshape(-1, h, d)
    b1 = weights[:, cut:cut + h]
    W2 = weights[:, cut + h:cut + 2 * h]
    b2 = weights[:, -1]
    hidden = np.maximum(np.einsum("md,shd->smh", X, W1) + b1[:, None, :], 0.0)
    logits = np.einsum("smh,sh->sm", hidden, W2) + b2[:, None]
    return clamp_probability(expit(logits))
