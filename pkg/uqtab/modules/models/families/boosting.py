"""
Gradient boosting on the logistic loss
Each round fits a depth-limited regression tree to the residuals y - p and
replaces the leaf values with one Newton step, sum(r) / sum(p(1-p))
"""

import logging
from typing import List

import numpy as np
from scipy.special import expit

from uqtab.modules.models.families.base import ClassifierFamily, GradientBoostingParams, TrainedClassifier
from uqtab.modules.models.families.tree import TreeArrays, build_tree

logger = logging.getLogger(__name__)

HESSIAN_FLOOR = 1e-12


class GradientBoostingModel(TrainedClassifier):
    family = ClassifierFamily.GRADIENT_BOOSTING

    def __init__(self, hp: GradientBoostingParams, feature_names, init_score: float, trees: List[TreeArrays]):
        super().__init__(hp, feature_names)
        self.init_score = init_score
        self.trees = trees

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Additive log-odds score"""
        X = self.check_input(X)
        score = np.full(X.shape[0], self.init_score)
        for tree in self.trees:
            score += self.hp.learning_rate * tree.predict(X)
        return score

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    @property
    def n_parameters(self) -> int:
        return 1 + sum(tree.n_nodes for tree in self.trees)


def fit(hp: GradientBoostingParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> GradientBoostingModel:
    y = np.asarray(y, dtype=float)
    base_rate = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    init_score = float(np.log(base_rate / (1.0 - base_rate)))

    score = np.full(X.shape[0], init_score)
    trees: List[TreeArrays] = []
    for _ in range(hp.n_trees):
        p = expit(score)
        residual = y - p
        tree = build_tree(X, residual, "mse", hp.depth, hp.min_split)
        leaves = tree.apply(X)
        hessian = p * (1.0 - p)
        numerator = np.bincount(leaves, weights=residual, minlength=tree.n_nodes)
        denominator = np.bincount(leaves, weights=hessian, minlength=tree.n_nodes)
        leaf_values = np.where(
            tree.feature < 0, numerator / np.maximum(denominator, HESSIAN_FLOOR), 0.0
        )
        tree = tree.with_leaf_values(leaf_values)
        trees.append(tree)
        score = score + hp.learning_rate * leaf_values[leaves]

    logger.debug(f"GRADIENT_BOOSTING: {len(trees)} trees, init log-odds {init_score:.4f}")
    return GradientBoostingModel(hp, feature_names, init_score, trees)
