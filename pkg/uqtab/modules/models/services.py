"""
Logic for Models module
Fitting and prediction through one entry point per operation, and
grid-search cross-validation over (hyperparameters x fold count)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from uqtab.core.errors import SingularFit, UqtabError
from uqtab.core.seeds import derive_seed, make_rng
from uqtab.core.stage_manager import run_parallel
from uqtab.modules.data.services import EncodedMatrix, LabelVector, stratified_folds
from uqtab.modules.models.families import boosting, forest, knn, logistic, mlp, naive_bayes, svm, tree
from uqtab.modules.models.families.base import (
    ClassifierFamily,
    HyperParams,
    TrainedClassifier,
    parse_hyperparams,
)
from uqtab.modules.models.metrics import confusion, evaluate, metrics  # noqa: F401
from uqtab.modules.resample.services import SmoteConfig, smote

logger = logging.getLogger(__name__)

FITTERS: Dict[ClassifierFamily, Callable[..., TrainedClassifier]] = {
    ClassifierFamily.LOGISTIC: logistic.fit,
    ClassifierFamily.KNN: knn.fit,
    ClassifierFamily.NAIVE_BAYES: naive_bayes.fit,
    ClassifierFamily.DECISION_TREE: tree.fit,
    ClassifierFamily.RANDOM_FOREST: forest.fit,
    ClassifierFamily.GRADIENT_BOOSTING: boosting.fit,
    ClassifierFamily.SVM: svm.fit,
    ClassifierFamily.MLP: mlp.fit,
}

DEFAULT_GRIDS: Dict[ClassifierFamily, List[Dict[str, Any]]] = {
    ClassifierFamily.LOGISTIC: [{"l2_lambda": lam} for lam in (0.0, 0.01, 0.1, 1.0)],
    ClassifierFamily.KNN: [{"k": k} for k in (3, 5, 7, 9)],
    ClassifierFamily.NAIVE_BAYES: [{"var_smoothing": 1e-9}],
    ClassifierFamily.DECISION_TREE: [{"max_depth": depth} for depth in (3, 5, 10, None)],
    ClassifierFamily.RANDOM_FOREST: [{"n_trees": n} for n in (100, 300)],
    ClassifierFamily.GRADIENT_BOOSTING: [
        {"n_trees": n, "learning_rate": lr, "depth": depth}
        for n in (100, 200)
        for lr in (0.05, 0.1)
        for depth in (2, 3)
    ],
    ClassifierFamily.SVM: [{"C": c, "kernel": kernel} for c in (0.1, 1.0, 10.0) for kernel in ("linear", "rbf")],
    ClassifierFamily.MLP: [
        {"hidden_units": h, "learning_rate": lr} for h in (8, 16) for lr in (1e-2, 1e-3)
    ],
}


def _as_arrays(X: Union[EncodedMatrix, np.ndarray], y) -> Tuple[np.ndarray, np.ndarray, Tuple[str, ...]]:
    if isinstance(X, EncodedMatrix):
        values, names = X.values, X.feature_names
    else:
        values = np.asarray(X, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        names = tuple(f"x{j}" for j in range(values.shape[1]))
    labels = np.asarray(getattr(y, "labels", y)).astype(int)
    return np.asarray(values, dtype=float), labels, tuple(names)


def fit(
    family: ClassifierFamily,
    hp: Union[HyperParams, Dict[str, Any], None],
    X: Union[EncodedMatrix, np.ndarray],
    y: Union[LabelVector, np.ndarray],
    seed: int,
    workers: int = 1,
) -> TrainedClassifier:
    """
    Fits one classifier family
    Args:
        family: Classifier family tag
        hp: Hyperparameters (model or key/value map; None = family defaults)
        X: Training matrix
        y: Training labels
        seed: Seeds bootstrap draws, weight init and shuffles
        workers: Thread pool size for forest trees
    Returns:
        TrainedClassifier
    Raises:
        SingularFit: Fewer than 2 rows, or one class only (never for NAIVE_BAYES)
        NonConvergence: Iterates left the finite region
        ValueError: Hyperparameters invalid for the family, or no rows
    """
    family = ClassifierFamily(family)
    hp = parse_hyperparams(family, hp)
    values, labels, names = _as_arrays(X, y)
    if values.shape[0] != labels.shape[0]:
        raise ValueError(f"matrix has {values.shape[0]} rows, labels have {labels.shape[0]}")
    if values.shape[0] == 0:
        raise ValueError(f"{family.value} got no training rows")
    if family != ClassifierFamily.NAIVE_BAYES:
        if values.shape[0] < 2:
            raise SingularFit(f"{family.value} needs at least 2 training rows")
        if np.unique(labels).size < 2:
            raise SingularFit(f"{family.value} needs both classes in the training data")

    rng = make_rng(seed)
    if family == ClassifierFamily.RANDOM_FOREST:
        return forest.fit(hp, values, labels, rng, names, workers=workers)
    return FITTERS[family](hp, values, labels, rng, names)


def predict_proba(model: TrainedClassifier, X: Union[EncodedMatrix, np.ndarray]) -> np.ndarray:
    """
    Class-1 probabilities
    Raises:
        FeatureMismatch: If the columns differ from the fitted feature names
    """
    if isinstance(X, EncodedMatrix):
        return model.predict_proba(X.values, X.feature_names)
    return model.predict_proba(X)


def predict(model: TrainedClassifier, X: Union[EncodedMatrix, np.ndarray]) -> np.ndarray:
    """Labels by proba > 0.5, ties to class 0"""
    return (predict_proba(model, X) > 0.5).astype(int)


# ===== Grid search =====

@dataclass
class CvCell:
    """Mean CV accuracy of one (hyperparameters, fold count) pair"""

    family: ClassifierFamily
    grid_index: int
    hp: HyperParams
    folds: int
    fold_accuracies: List[float] = field(default_factory=list)
    mean_accuracy: float = -np.inf
    error: Optional[str] = None

    def to_row(self, selected: bool = False) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "grid_index": self.grid_index,
            "hyperparams": self.hp.describe(),
            "folds": self.folds,
            "mean_cv_accuracy": self.mean_accuracy,
            "fold_accuracies": ";".join(f"{a:.6f}" for a in self.fold_accuracies),
            "selected": selected,
            "error": self.error or "",
        }


CV_TABLE_COLUMNS = [
    "family", "grid_index", "hyperparams", "folds",
    "mean_cv_accuracy", "fold_accuracies", "selected", "error",
]


@dataclass
class GridSearchResult:
    family: ClassifierFamily
    best: CvCell
    cells: List[CvCell]
    refit_seed: int
    model: TrainedClassifier

    @property
    def best_hp(self) -> HyperParams:
        return self.best.hp

    @property
    def best_folds(self) -> int:
        return self.best.folds

    def table_rows(self) -> List[Dict[str, Any]]:
        return [cell.to_row(cell is self.best) for cell in self.cells]

    def best_for_folds(self, folds: int) -> Optional[CvCell]:
        """Best cell among one fold count (ties to the earlier grid index)"""
        candidates = [c for c in self.cells if c.folds == folds]
        if not candidates:
            return None
        return select_best(candidates)


def select_best(cells: Sequence[CvCell]) -> CvCell:
    """argmax mean accuracy; ties to fewer folds, then the earlier grid index"""
    return min(cells, key=lambda c: (-c.mean_accuracy, c.folds, c.grid_index))


def refit_seed_for(seed: int, family: ClassifierFamily, grid_index: int) -> int:
    return derive_seed(seed, "refit", ClassifierFamily(family).value, grid_index)


def grid_search_cv(
    family: ClassifierFamily,
    grid: Sequence[Union[HyperParams, Dict[str, Any]]],
    X: EncodedMatrix,
    y: LabelVector,
    folds: Union[int, Sequence[int]],
    seed: int,
    smote_cfg: Optional[SmoteConfig] = None,
    metric_scale: Optional[np.ndarray] = None,
    refit_data: Optional[Tuple[EncodedMatrix, LabelVector]] = None,
    workers: int = 1,
) -> GridSearchResult:
    """
    Stratified k-fold grid search
    Args:
        family: Classifier family
        grid: Hyperparameter candidates
        X, y: Training partition (before resampling)
        folds: One fold count or several, each in {2, 5, 10}
        seed: Stage seed; fold assignment and in-fold SMOTE depend only on
            (seed, fold count, fold) so every candidate sees the same folds
        smote_cfg: When given, SMOTE is applied to each training fold
        metric_scale: Neighbor-distance scale for SMOTE on unscaled matrices
        refit_data: Data the winner is refit on; default is X (resampled
            with smote_cfg when given)
        workers: Thread pool size over grid cells
    Returns:
        GridSearchResult; failed cells score -inf
    Raises:
        ClassTooSmall: If a fold count exceeds a class size
        SingularFit: If every cell failed
    """
    family = ClassifierFamily(family)
    fold_counts = [folds] if isinstance(folds, int) else sorted(set(folds))
    candidates = [parse_hyperparams(family, hp) for hp in grid]
    if not candidates:
        raise ValueError(f"empty grid for {family.value}")

    values, labels, _ = _as_arrays(X, y)
    splits = {k: stratified_folds(labels, k, make_rng(derive_seed(seed, "folds", k))) for k in fold_counts}

    def run_cell(key: Tuple[int, int]) -> CvCell:
        grid_index, k = key
        cell = CvCell(family=family, grid_index=grid_index, hp=candidates[grid_index], folds=k)
        try:
            for fold, valid_idx in enumerate(splits[k]):
                train_mask = np.ones(labels.shape[0], dtype=bool)
                train_mask[valid_idx] = False
                X_fold = X.take(np.flatnonzero(train_mask))
                y_fold = LabelVector(labels[train_mask])
                if smote_cfg is not None:
                    fold_cfg = SmoteConfig(
                        k_neighbors=smote_cfg.k_neighbors,
                        seed=derive_seed(seed, "smote", k, fold),
                        target_ratio=smote_cfg.target_ratio,
                    )
                    X_fold, y_fold = smote(X_fold, y_fold, fold_cfg, metric_scale)
                model = fit(family, cell.hp, X_fold, y_fold, derive_seed(seed, family.value, grid_index, k, fold))
                yhat = predict(model, X.take(valid_idx))
                cell.fold_accuracies.append(float(np.mean(yhat == labels[valid_idx])))
            cell.mean_accuracy = float(np.mean(cell.fold_accuracies))
        except UqtabError as e:
            logger.warning(f"{family.value} cell {grid_index} ({k}-fold) failed: {e}")
            cell.error = str(e)
            cell.mean_accuracy = -np.inf
        logger.debug(f"{family.value} [{cell.hp.describe()}] {k}-fold: {cell.mean_accuracy:.4f}")
        return cell

    keys = [(g, k) for g in range(len(candidates)) for k in fold_counts]
    cells = run_parallel(run_cell, keys, workers)

    best = select_best(cells)
    if not np.isfinite(best.mean_accuracy):
        raise SingularFit(f"every grid cell failed for {family.value}")

    if refit_data is None:
        X_fit, y_fit = X, y
        if smote_cfg is not None:
            refit_cfg = SmoteConfig(smote_cfg.k_neighbors, derive_seed(seed, "smote", "refit"), smote_cfg.target_ratio)
            X_fit, y_fit = smote(X, y, refit_cfg, metric_scale)
    else:
        X_fit, y_fit = refit_data

    refit_seed = refit_seed_for(seed, family, best.grid_index)
    model = fit(family, best.hp, X_fit, y_fit, refit_seed)
    logger.info(
        f"{family.value}: best [{best.hp.describe()}] with {best.folds}-fold CV accuracy {best.mean_accuracy:.4f}"
    )
    return GridSearchResult(family=family, best=best, cells=cells, refit_seed=refit_seed, model=model)
