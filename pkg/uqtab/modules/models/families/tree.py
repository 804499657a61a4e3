"""
CART trees on numpy arrays
Shared by DECISION_TREE, RANDOM_FOREST (Gini) and GRADIENT_BOOSTING (squared error)
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from uqtab.modules.models.families.base import ClassifierFamily, DecisionTreeParams, TrainedClassifier

logger = logging.getLogger(__name__)

LEAF = -1
IMPURITY_EPS = 1e-15
GAIN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """
    Flat tree storage, nodes in depth-first preorder
    feature == LEAF marks a leaf; rows go left when x[feature] <= threshold
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row"""
        nodes = np.zeros(X.shape[0], dtype=int)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] != LEAF]
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def with_leaf_values(self, values: np.ndarray) -> "TreeArrays":
        return TreeArrays(
            self.feature, self.threshold, self.left, self.right,
            np.asarray(values, dtype=float), self.n_samples, self.impurity,
        )

    def impurity_decrease(self, d: int) -> np.ndarray:
        """Total weighted impurity decrease per feature (unnormalized)"""
        importance = np.zeros(d)
        for node in np.flatnonzero(self.feature != LEAF):
            l, r = self.left[node], self.right[node]
            decrease = (
                self.n_samples[node] * self.impurity[node]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            )
            importance[self.feature[node]] += max(decrease, 0.0)
        return importance

    def feature_importances(self, d: int) -> np.ndarray:
        """Impurity decrease normalized to sum 1 (all zeros for a stump-free tree)"""
        importance = self.impurity_decrease(d)
        total = importance.sum()
        return importance / total if total > 0 else importance


def _node_impurity(target: np.ndarray, criterion: str) -> float:
    if target.size == 0:
        return 0.0
    if criterion == "gini":
        p = target.mean()
        return 2.0 * p * (1.0 - p)
    return float(target.var())


def _best_split(
    X: np.ndarray,
    target: np.ndarray,
    rows: np.ndarray,
    features: np.ndarray,
    criterion: str,
    parent_impurity: float,
) -> Optional[Tuple[int, float, float]]:
    """
    Best (feature, threshold, gain) over candidate features
    Features are scanned in ascending order and only a strictly better gain
    replaces the incumbent, so ties go to the lowest feature then the lowest threshold
    """
    n = rows.size
    y = target[rows]
    best = None
    best_gain = -np.inf
    for f in features:
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[order]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue

        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        s_left = np.cumsum(ys)[:-1]
        s_right = ys.sum() - s_left
        if criterion == "gini":
            p_left = s_left / n_left
            p_right = s_right / n_right
            child = (n_left * 2.0 * p_left * (1.0 - p_left) + n_right * 2.0 * p_right * (1.0 - p_right)) / n
        else:
            q_left = np.cumsum(ys * ys)[:-1]
            q_right = (ys * ys).sum() - q_left
            sse_left = q_left - s_left * s_left / n_left
            sse_right = q_right - s_right * s_right / n_right
            child = (sse_left + sse_right) / n

        gain = np.where(valid, parent_impurity - child, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain + GAIN_EPS:
            best_gain = float(gain[pos])
            threshold = 0.5 * (xs[pos] + xs[pos + 1])
            if threshold >= xs[pos + 1]:
                threshold = float(xs[pos])
            best = (int(f), float(threshold), best_gain)
    return best


def build_tree(
    X: np.ndarray,
    target: np.ndarray,
    criterion: str = "gini",
    max_depth: Optional[int] = None,
    min_split: int = 2,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TreeArrays:
    """
    Grows a CART tree depth-first
    Args:
        X: n x d matrix
        target: 0/1 labels for "gini", real residuals for "mse"
        criterion: "gini" or "mse"
        max_depth: None for unlimited
        min_split: minimum rows in a node to try a split
        max_features: features sampled per node (None = all, no RNG use)
        rng: required when max_features < d
    Returns:
        TreeArrays with node values = mean target of the node
    """
    X = np.asarray(X, dtype=float)
    target = np.asarray(target, dtype=float)
    d = X.shape[1]
    subsample = max_features is not None and max_features < d
    if subsample and rng is None:
        raise ValueError("feature subsampling needs an rng")

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    n_samples: List[int] = []
    impurity: List[float] = []

    def new_node(rows: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(target[rows].mean()) if rows.size else 0.0)
        n_samples.append(int(rows.size))
        impurity.append(_node_impurity(target[rows], criterion))
        return len(feature) - 1

    all_features = np.arange(d)
    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if rows.size < min_split or impurity[node] <= IMPURITY_EPS:
            continue
        if max_depth is not None and depth >= max_depth:
            continue

        if subsample:
            candidates = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            candidates = all_features
        split = _best_split(X, target, rows, candidates, criterion, impurity[node])
        if split is None or split[2] < -GAIN_EPS:
            continue

        f, thr, _ = split
        go_left = X[rows, f] <= thr
        left_rows, right_rows = rows[go_left], rows[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return TreeArrays(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(n_samples, dtype=int),
        impurity=np.asarray(impurity, dtype=float),
    )


class DecisionTreeModel(TrainedClassifier):
    """Single CART classification tree; proba = class-1 fraction of the leaf"""

    family = ClassifierFamily.DECISION_TREE

    def __init__(self, hp: DecisionTreeParams, feature_names, tree: TreeArrays):
        super().__init__(hp, feature_names)
        self.tree = tree

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)

    @property
    def n_parameters(self) -> int:
        return self.tree.n_nodes

    @property
    def feature_importances(self) -> np.ndarray:
        return self.tree.feature_importances(len(self.feature_names))


def fit(hp: DecisionTreeParams, X: np.ndarray, y: np.ndarray, rng: np.random.Generator, feature_names) -> DecisionTreeModel:
    tree = build_tree(X, y, "gini", hp.max_depth, hp.min_split)
    logger.debug(f"DECISION_TREE: {tree.n_nodes} nodes, depth {tree.depth}")
    return DecisionTreeModel(hp, feature_names, tree)
