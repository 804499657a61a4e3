"""
Logic for Explain module
Exact Shapley values by enumerating every feature coalition. The coalition
value is interventional: features in the coalition come from the explained
instance, the rest from each background row, averaged over the background.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from uqtab.core.errors import NonFiniteModelOutput, TooManyFeatures
from uqtab.core.seeds import make_rng
from uqtab.core.stage_manager import run_parallel
from uqtab.modules.bayes.nuts import PosteriorSampleSet
from uqtab.modules.bayes.services import posterior_predict
from uqtab.modules.data.services import EncodedMatrix
from uqtab.modules.models.families.base import TrainedClassifier

logger = logging.getLogger(__name__)

MAX_FEATURES = 20
CHUNK_ROWS = 2048
EFFICIENCY_TOL = 1e-9

Predict = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BackgroundSet:
    """Rows that stand in for absent features"""

    rows: np.ndarray
    seed: Optional[int] = None
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] < 1:
            raise ValueError("background needs at least one row")

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])


@dataclass
class ShapExplanation:
    """
    phi0 + sum(phi) == fx (efficiency)
    coalition_values[mask] is v(S) with bit j of mask set when feature j is in S
    """

    phi0: float
    phi: np.ndarray
    instance: np.ndarray
    fx: float
    feature_names: Tuple[str, ...]
    coalition_values: Optional[np.ndarray] = None

    @property
    def efficiency_gap(self) -> float:
        return abs(self.phi0 + float(np.sum(self.phi)) - self.fx)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi0": self.phi0,
            "fx": self.fx,
            "phi": dict(zip(self.feature_names, self.phi.tolist())),
            "instance": dict(zip(self.feature_names, self.instance.tolist())),
        }


def make_background(X_train: EncodedMatrix, size: int, seed: int) -> BackgroundSet:
    """min(size, n_train) rows drawn without replacement, kept in row order"""
    count = min(size, X_train.n)
    rows = np.sort(make_rng(seed).choice(X_train.n, size=count, replace=False))
    return BackgroundSet(rows=X_train.values[rows].copy(), seed=seed, feature_names=tuple(X_train.feature_names))


def coalition_sizes(d: int) -> np.ndarray:
    masks = np.arange(2 ** d)
    return sum(((masks >> j) & 1) for j in range(d)) if d else np.zeros(1, dtype=int)


def coalition_values(predict: Predict, x: np.ndarray, bg: BackgroundSet) -> np.ndarray:
    """
    v(S) for every subset S, indexed by bitmask
    Raises:
        NonFiniteModelOutput: If predict returns NaN or infinity
    """
    d = x.shape[0]
    masks = np.arange(2 ** d)
    bits = ((masks[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    values = np.empty(masks.shape[0])
    per_chunk = max(1, CHUNK_ROWS // bg.size)
    for start in range(0, masks.shape[0], per_chunk):
        take = bits[start:start + per_chunk]
        composed = np.where(take[:, None, :], x[None, None, :], bg.rows[None, :, :])
        out = np.asarray(predict(composed.reshape(-1, d)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteModelOutput("model returned a non-finite value on a composed input")
        values[start:start + take.shape[0]] = out.reshape(take.shape[0], bg.size).mean(axis=1)
    return values


def shapley_from_values(values: np.ndarray, d: int) -> np.ndarray:
    """phi_i = sum over S without i of |S|!(d-|S|-1)!/d! * (v(S + i) - v(S))"""
    masks = np.arange(2 ** d)
    sizes = coalition_sizes(d)
    weights = np.array([1.0 / (d * comb(d - 1, s, exact=True)) for s in range(d)])
    phi = np.zeros(d)
    for i in range(d):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = float(np.sum(weights[sizes[without]] * (values[without | (1 << i)] - values[without])))
    return phi


def exact_shap(
    predict: Predict,
    x: np.ndarray,
    bg: BackgroundSet,
    feature_names: Optional[Sequence[str]] = None,
    keep_values: bool = False,
) -> ShapExplanation:
    """
    Exact Shapley attribution of one instance
    Args:
        predict: Maps an (m, d) matrix to m probabilities
        x: Instance to explain
        bg: Background rows
        feature_names: Column names (defaults to the background's)
        keep_values: Keep the 2^d coalition values on the result
    Returns:
        ShapExplanation with phi0 = v(empty) and fx = v(all)
    Raises:
        TooManyFeatures: If d > 20
        NonFiniteModelOutput: If the model output is not finite
    """
    x = np.asarray(x, dtype=float).ravel()
    d = x.shape[0]
    if d > MAX_FEATURES:
        raise TooManyFeatures(d)
    if d != bg.d:
        raise ValueError(f"instance has {d} features, background has {bg.d}")
    names = tuple(feature_names) if feature_names is not None else (bg.feature_names or tuple(f"x{j}" for j in range(d)))

    values = coalition_values(predict, x, bg)
    phi = shapley_from_values(values, d) if d else np.zeros(0)
    explanation = ShapExplanation(
        phi0=float(values[0]),
        phi=phi,
        instance=x.copy(),
        fx=float(values[-1]),
        feature_names=names,
        coalition_values=values if keep_values else None,
    )
    if explanation.efficiency_gap > EFFICIENCY_TOL:
        logger.warning(f"Shapley efficiency gap {explanation.efficiency_gap:.2e}")
    return explanation


def explain_rows(
    predict: Predict,
    X_explain: EncodedMatrix,
    bg: BackgroundSet,
    workers: int = 1,
) -> List[ShapExplanation]:
    """One explanation per row; rows may run on a thread pool"""
    if X_explain.d > MAX_FEATURES:
        raise TooManyFeatures(X_explain.d)
    names = tuple(X_explain.feature_names)

    def run(row: int) -> ShapExplanation:
        return exact_shap(predict, X_explain.values[row], bg, names)

    explanations = run_parallel(run, list(range(X_explain.n)), workers)
    logger.info(f"Explained {len(explanations)} instances over {bg.size} background rows")
    return explanations


def explain_bnn(
    samples: PosteriorSampleSet,
    X_explain: EncodedMatrix,
    bg: BackgroundSet,
    workers: int = 1,
) -> List[ShapExplanation]:
    """Explains the posterior predictive mean"""

    def predict(values: np.ndarray) -> np.ndarray:
        return posterior_predict(samples, values).mean

    return explain_rows(predict, X_explain, bg, workers)


def explain_model(
    model: TrainedClassifier,
    X_explain: EncodedMatrix,
    bg: BackgroundSet,
    workers: int = 1,
) -> List[ShapExplanation]:
    """Explains a classical classifier's class-1 probability"""
    model.check_input(X_explain.values, X_explain.feature_names)
    return explain_rows(model.predict_proba, X_explain, bg, workers)


def global_ranking(explanations: Sequence[ShapExplanation]) -> List[Tuple[str, float]]:
    """Features by mean |phi| across explanations, descending; ties keep column order"""
    if not explanations:
        raise ValueError("no explanations to rank")
    names = explanations[0].feature_names
    importance = np.mean(np.abs(np.vstack([e.phi for e in explanations])), axis=0)
    order = sorted(range(len(names)), key=lambda j: (-importance[j], j))
    return [(names[j], float(importance[j])) for j in order]


def explanations_to_dict(
    explanations: Sequence[ShapExplanation],
    target: str,
    background: BackgroundSet,
    rows: Sequence[int],
) -> Dict[str, Any]:
    """shap.json payload"""
    return {
        "target": target,
        "background_size": background.size,
        "background_seed": background.seed,
        "feature_names": list(explanations[0].feature_names) if explanations else [],
        "ranking": [{"feature": f, "mean_abs_phi": v} for f, v in global_ranking(explanations)] if explanations else [],
        "max_efficiency_gap": max((e.efficiency_gap for e in explanations), default=0.0),
        "explanations": [{"row": int(r), **e.to_dict()} for r, e in zip(rows, explanations)],
    }
