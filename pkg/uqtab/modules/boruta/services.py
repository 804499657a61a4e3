"""
Logic for Boruta module
All-relevant feature selection: real features compete against permuted
shadow copies in repeated random forests; binomial tests on the hit counts
confirm or reject each feature
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel
from scipy.stats import binom

from uqtab.core.errors import EmptySelection
from uqtab.core.seeds import derive_seed, make_rng
from uqtab.modules.data.services import EncodedMatrix, LabelVector
from uqtab.modules.models.families.base import RandomForestParams
from uqtab.modules.models.families.forest import RandomForestModel, grow_forest

logger = logging.getLogger(__name__)

CONFIRMED = "Confirmed"
REJECTED = "Rejected"
TENTATIVE = "Tentative"

MIN_SHADOWS = 5


@dataclass(frozen=True)
class BorutaConfig:
    """
    forest_hp: forest used every iteration; its feature_subset is replaced
    by floor(sqrt(columns)) of the real+shadow matrix
    """

    max_iterations: int = 100
    alpha: float = 0.05
    forest_hp: RandomForestParams = field(default_factory=lambda: RandomForestParams(n_trees=300))
    seed: int = 0
    importance: Literal["gini", "permutation"] = "gini"
    resolve_tentative: bool = True

    def __post_init__(self):
        if self.max_iterations < 10:
            raise ValueError("max_iterations must be >= 10")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")


class FeatureDecision(BaseModel):
    """Per-feature outcome of a Boruta run"""

    feature_names: List[str]
    status: Dict[str, str]
    hit_counts: Dict[str, int]
    iterations: int
    decided_at: Dict[str, Optional[int]]
    importance_history: List[Dict[str, Optional[float]]]
    shadow_max_history: List[float]
    tentative_resolved: List[str] = []

    @property
    def confirmed(self) -> List[str]:
        return [f for f in self.feature_names if self.status[f] == CONFIRMED]

    @property
    def rejected(self) -> List[str]:
        return [f for f in self.feature_names if self.status[f] == REJECTED]

    @property
    def tentative(self) -> List[str]:
        return [f for f in self.feature_names if self.status[f] == TENTATIVE]

    def importance_series(self, feature: str) -> List[float]:
        return [h[feature] for h in self.importance_history if h.get(feature) is not None]


def _permutation_importance(model: RandomForestModel, data: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Accuracy drop when one column is permuted"""
    base = np.mean(model.predict(data) == y)
    drops = np.zeros(data.shape[1])
    for j in range(data.shape[1]):
        shuffled = data.copy()
        shuffled[:, j] = rng.permutation(shuffled[:, j])
        drops[j] = base - np.mean(model.predict(shuffled) == y)
    return drops


def make_shadows(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Permutes every column independently"""
    shadows = np.empty_like(values)
    for j in range(values.shape[1]):
        shadows[:, j] = rng.permutation(values[:, j])
    return shadows


def boruta_select(X: EncodedMatrix, y: LabelVector, cfg: BorutaConfig, workers: int = 1) -> FeatureDecision:
    """
    Runs Boruta until every feature is decided or max_iterations is reached
    Every feature not yet Rejected gets a shadow each iteration; shadows are
    replicated to at least 5 columns. A feature scores a hit when its
    importance exceeds the largest shadow importance. Thresholds are
    alpha / d (Bonferroni).
    Args:
        X: Training matrix (unscaled encodings are fine; trees are scale-free)
        y: Training labels
        cfg: Boruta settings
        workers: Thread pool size for the trees of one iteration
    Returns:
        FeatureDecision
    """
    d = X.d
    if d < 1:
        raise ValueError("boruta_select needs at least one feature")
    names = list(X.feature_names)
    labels = y.labels
    threshold = cfg.alpha / d

    status = [TENTATIVE] * d
    decided = [False] * d
    decided_at: Dict[str, Optional[int]] = {n: None for n in names}
    hits = np.zeros(d, dtype=int)
    history: List[Dict[str, Optional[float]]] = []
    shadow_max_history: List[float] = []
    shadow_rng = make_rng(derive_seed(cfg.seed, "shadows"))

    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        active = [j for j in range(d) if status[j] != REJECTED]
        source = active * int(math.ceil(MIN_SHADOWS / len(active)))
        data = np.hstack([X.values[:, active], make_shadows(X.values[:, source], shadow_rng)])
        n_cols = data.shape[1]
        max_features = max(1, int(math.floor(math.sqrt(n_cols))))

        forest_rng = make_rng(derive_seed(cfg.seed, "forest", iteration))
        hp = cfg.forest_hp
        trees = grow_forest(
            data, labels, hp.n_trees, hp.max_depth, hp.min_split, max_features, hp.bootstrap, forest_rng, workers
        )
        model = RandomForestModel(hp, [f"c{j}" for j in range(n_cols)], trees)
        if cfg.importance == "permutation":
            importance = _permutation_importance(model, data, labels, make_rng(derive_seed(cfg.seed, "permute", iteration)))
        else:
            importance = model.feature_importances

        real = importance[: len(active)]
        shadow_max = float(importance[len(active):].max())
        shadow_max_history.append(shadow_max)
        record: Dict[str, Optional[float]] = {n: None for n in names}
        for pos, j in enumerate(active):
            record[names[j]] = float(real[pos])
            if real[pos] > shadow_max:
                hits[j] += 1
        history.append(record)

        for j in active:
            if decided[j]:
                continue
            # P(hits >= k) and P(hits <= k) under a fair coin
            if binom.sf(hits[j] - 1, iteration, 0.5) < threshold:
                status[j] = CONFIRMED
            elif binom.cdf(hits[j], iteration, 0.5) < threshold:
                status[j] = REJECTED
            else:
                continue
            decided[j] = True
            decided_at[names[j]] = iteration
            logger.debug(f"Boruta iteration {iteration}: {names[j]} {status[j]} ({hits[j]} hits)")

        if all(decided):
            break

    resolved: List[str] = []
    undecided = [j for j in range(d) if not decided[j]]
    if undecided and cfg.resolve_tentative:
        shadow_median = float(np.median(shadow_max_history))
        for j in undecided:
            series = [h[names[j]] for h in history if h[names[j]] is not None]
            status[j] = CONFIRMED if float(np.median(series)) > shadow_median else REJECTED
            resolved.append(names[j])
        logger.info(f"Boruta resolved tentative features by median: {resolved}")

    decision = FeatureDecision(
        feature_names=names,
        status=dict(zip(names, status)),
        hit_counts={n: int(h) for n, h in zip(names, hits)},
        iterations=iteration,
        decided_at=decided_at,
        importance_history=history,
        shadow_max_history=shadow_max_history,
        tentative_resolved=resolved,
    )
    logger.info(
        f"Boruta after {iteration} iterations: {len(decision.confirmed)} confirmed, "
        f"{len(decision.rejected)} rejected, {len(decision.tentative)} tentative"
    )
    return decision


def reduce(X: EncodedMatrix, decision: FeatureDecision) -> EncodedMatrix:
    """
    Keeps the Confirmed columns in their original order
    Raises:
        EmptySelection: If no feature is Confirmed
        ValueError: If the decision was computed on other columns
    """
    if list(X.feature_names) != decision.feature_names:
        raise ValueError("decision was computed on a different feature set")
    confirmed = decision.confirmed
    if not confirmed:
        raise EmptySelection("Boruta confirmed no feature")
    return X.select(confirmed)
