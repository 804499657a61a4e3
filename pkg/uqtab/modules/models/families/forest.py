"""
Random forest: bootstrap rows, per-node feature subsampling, majority vote
"""

import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from uqtab.core.seeds import make_rng
from uqtab.core.stage_manager import run_parallel
from uqtab.modules.models.families.base import ClassifierFamily, RandomForestParams, TrainedClassifier
from uqtab.modules.models.families.tree import TreeArrays, build_tree

logger = logging.getLogger(__name__)


def resolve_max_features(feature_subset: Union[str, int], d: int) -> Optional[int]:
    """None means every feature at every node"""
    if feature_subset == "all":
        return None
    if feature_subset == "sqrt":
        return max(1, int(math.floor(math.sqrt(d))))
    return max(1, min(int(feature_subset), d))


class RandomForestModel(TrainedClassifier):
    """proba = fraction of trees whose leaf votes class 1"""

    family = ClassifierFamily.RANDOM_FOREST

    def __init__(self, hp: RandomForestParams, feature_names, trees: List[TreeArrays]):
        super().__init__(hp, feature_names)
        self.trees = trees

    def votes(self, X: np.ndarray) -> np.ndarray:
        """n_trees x n matrix of 0/1 votes (leaf fraction > 0.5)"""
        return np.vstack([(tree.predict(X) > 0.5).astype(float) for tree in self.trees])

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X).mean(axis=0)

    @property
    def n_parameters(self) -> int:
        return sum(tree.n_nodes for tree in self.trees)

    @property
    def feature_importances(self) -> np.ndarray:
        """Mean of per-tree normalized impurity decrease, renormalized"""
        d = len(self.feature_names)
        importance = np.mean([tree.feature_importances(d) for tree in self.trees], axis=0)
        total = importance.sum()
        return importance / total if total > 0 else importance


def grow_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    max_depth: Optional[int],
    min_split: int,
    max_features: Optional[int],
    bootstrap: bool,
    rng: np.random.Generator,
    workers: int = 1,
) -> List[TreeArrays]:
    """
    Grows n_trees classification trees
    Every tree gets its own seed drawn up front, so the result does not
    depend on the worker count
    """
    n = X.shape[0]
    seeds: Sequence[int] = rng.integers(0, 2**63 - 1, size=n_trees).tolist()

    def grow(seed: int) -> TreeArrays:
        tree_rng = make_rng(seed)
        rows = tree_rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        return build_tree(X[rows], y[rows], "gini", max_depth, min_split, max_features, tree_rng)

    return run_parallel(grow, seeds, workers)


def fit(hp: RandomForestParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names, workers: int = 1) -> RandomForestModel:
    max_features = resolve_max_features(hp.feature_subset, X.shape[1])
    trees = grow_forest(X, y, hp.n_trees, hp.max_depth, hp.min_split, max_features, hp.bootstrap, rng, workers)
    logger.debug(f"RANDOM_FOREST: {len(trees)} trees, max_features={max_features}")
    return RandomForestModel(hp, feature_names, trees)
