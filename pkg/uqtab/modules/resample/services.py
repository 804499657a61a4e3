"""
Logic for Resample module
SMOTE: synthetic minority rows interpolated toward minority nearest neighbors
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from uqtab.core.errors import TooFewMinority
from uqtab.core.seeds import make_rng
from uqtab.modules.data.services import EncodedMatrix, LabelVector, round_half_up

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoteConfig:
    """
    k_neighbors: neighbors considered per minority row
    target_ratio: minority / majority count after resampling (1.0 = balanced)
    """

    k_neighbors: int = 5
    seed: int = 0
    target_ratio: float = 1.0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must be in (0, 1]")


def _interpolate(base: np.ndarray, neighbor: np.ndarray, gap: np.ndarray) -> np.ndarray:
    """x_new = x_i + u * (x_nn - x_i), one gap per row"""
    gap = np.asarray(gap, dtype=float).reshape(-1, 1)
    return base + gap * (neighbor - base)


def nearest_minority_neighbors(points: np.ndarray, k: int, metric_scale: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Indices of the k Euclidean nearest other points for every point
    Distance ties go to the lower index
    Args:
        points: m x d minority rows
        k: neighbors per row (k < m)
        metric_scale: per-column divisor applied before measuring distance
    """
    scaled = points / metric_scale if metric_scale is not None else points
    diff = scaled[:, None, :] - scaled[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def smote(
    X: EncodedMatrix,
    y: LabelVector,
    cfg: SmoteConfig,
    metric_scale: Optional[np.ndarray] = None,
) -> Tuple[EncodedMatrix, LabelVector]:
    """
    Appends synthetic minority rows until minority = round(target_ratio * majority)
    Args:
        X: Training matrix (original rows are kept unchanged, in order)
        y: Training labels
        cfg: SMOTE settings
        metric_scale: Per-column divisor for neighbor distances; pass the
            scaler stddevs when X is in encoding units so neighbors match
            the ones found on the standardized matrix
    Returns:
        (resampled matrix, resampled labels)
    Raises:
        TooFewMinority: If a class is missing or the minority has <= k rows
    """
    if X.n != y.n:
        raise ValueError(f"matrix has {X.n} rows, labels have {y.n}")
    negatives, positives = y.counts()
    if negatives == 0 or positives == 0:
        raise TooFewMinority("SMOTE needs both classes")

    minority_class = 1 if positives <= negatives else 0
    minority_idx = np.flatnonzero(y.labels == minority_class)
    n_minority = minority_idx.size
    n_majority = y.n - n_minority
    if n_minority <= cfg.k_neighbors:
        raise TooFewMinority(
            f"minority class has {n_minority} rows; SMOTE with k={cfg.k_neighbors} needs more"
        )

    n_synthetic = round_half_up(cfg.target_ratio * n_majority) - n_minority
    if n_synthetic <= 0:
        logger.debug("SMOTE: class ratio already at target, nothing to add")
        return X, y

    points = X.values[minority_idx]
    neighbors = nearest_minority_neighbors(points, cfg.k_neighbors, metric_scale)

    rng = make_rng(cfg.seed)
    base = rng.integers(0, n_minority, size=n_synthetic)
    pick = rng.integers(0, cfg.k_neighbors, size=n_synthetic)
    gap = rng.random(n_synthetic)
    synthetic = _interpolate(points[base], points[neighbors[base, pick]], gap)

    values = np.vstack([X.values, synthetic])
    labels = np.concatenate([y.labels, np.full(n_synthetic, minority_class, dtype=int)])
    logger.debug(
        f"SMOTE: {n_minority} minority / {n_majority} majority rows, added {n_synthetic} synthetic"
    )
    return X.with_values(values), LabelVector(labels)
