"""
Classifier family tags, hyperparameter models and the fitted-model interface
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, ClassVar, Dict, Literal, Optional, Sequence, Tuple, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from uqtab.core.errors import FeatureMismatch


class ClassifierFamily(str, Enum):
    """Closed set of classical classifier families"""

    LOGISTIC = "LOGISTIC"
    KNN = "KNN"
    NAIVE_BAYES = "NAIVE_BAYES"
    DECISION_TREE = "DECISION_TREE"
    RANDOM_FOREST = "RANDOM_FOREST"
    GRADIENT_BOOSTING = "GRADIENT_BOOSTING"
    SVM = "SVM"
    MLP = "MLP"

    @property
    def uses_scaled_inputs(self) -> bool:
        """Tree learners consume unscaled encodings; the rest consume z-scores"""
        return self not in TREE_FAMILIES

    @property
    def short_name(self) -> str:
        return SHORT_NAMES[self]


TREE_FAMILIES = frozenset(
    {ClassifierFamily.DECISION_TREE, ClassifierFamily.RANDOM_FOREST, ClassifierFamily.GRADIENT_BOOSTING}
)

SHORT_NAMES = {
    ClassifierFamily.LOGISTIC: "LR",
    ClassifierFamily.KNN: "KNN",
    ClassifierFamily.NAIVE_BAYES: "NB",
    ClassifierFamily.DECISION_TREE: "DT",
    ClassifierFamily.RANDOM_FOREST: "RF",
    ClassifierFamily.GRADIENT_BOOSTING: "GB",
    ClassifierFamily.SVM: "SVM",
    ClassifierFamily.MLP: "MLP",
}


# ===== Hyperparameters =====

class HyperParams(BaseModel):
    """Base of the per-family hyperparameter models"""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    family: ClassVar[ClassifierFamily]

    def describe(self) -> str:
        """Compact text for tables, e.g. "k=5" """
        return ",".join(f"{k}={v}" for k, v in self.model_dump().items())


class LogisticParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.LOGISTIC

    l2_lambda: float = Field(0.0, ge=0.0)
    max_iter: int = Field(5000, ge=1)
    tol: float = Field(1e-8, gt=0.0)


class KnnParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.KNN

    k: int = Field(5, ge=1)


class NaiveBayesParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.NAIVE_BAYES

    var_smoothing: float = Field(1e-9, ge=0.0)


class DecisionTreeParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.DECISION_TREE

    max_depth: Optional[int] = Field(None, ge=1)
    min_split: int = Field(2, ge=2)


class RandomForestParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.RANDOM_FOREST

    n_trees: int = Field(100, ge=1)
    max_depth: Optional[int] = Field(None, ge=1)
    min_split: int = Field(2, ge=2)
    feature_subset: Union[Literal["sqrt", "all"], int] = "sqrt"
    bootstrap: bool = True


class GradientBoostingParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.GRADIENT_BOOSTING

    n_trees: int = Field(100, ge=0)
    learning_rate: float = Field(0.1, ge=0.0)
    depth: int = Field(3, ge=1)
    min_split: int = Field(2, ge=2)


class SvmParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.SVM

    C: float = Field(1.0, gt=0.0)
    kernel: Literal["linear", "rbf"] = "rbf"
    gamma: Optional[float] = Field(None, gt=0.0)
    tol: float = Field(1e-3, gt=0.0)
    max_iter: int = Field(10000, ge=1)


class MlpParams(HyperParams):
    family: ClassVar[ClassifierFamily] = ClassifierFamily.MLP

    hidden_units: int = Field(16, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(32, ge=1)


HYPERPARAM_MODELS: Dict[ClassifierFamily, Type[HyperParams]] = {
    ClassifierFamily.LOGISTIC: LogisticParams,
    ClassifierFamily.KNN: KnnParams,
    ClassifierFamily.NAIVE_BAYES: NaiveBayesParams,
    ClassifierFamily.DECISION_TREE: DecisionTreeParams,
    ClassifierFamily.RANDOM_FOREST: RandomForestParams,
    ClassifierFamily.GRADIENT_BOOSTING: GradientBoostingParams,
    ClassifierFamily.SVM: SvmParams,
    ClassifierFamily.MLP: MlpParams,
}


def parse_hyperparams(family: ClassifierFamily, values: Optional[Dict[str, Any]] = None) -> HyperParams:
    """
    Validates a key/value map against a family's hyperparameter model
    Raises:
        ValueError: On unknown keys or out-of-range values
    """
    family = ClassifierFamily(family)
    if isinstance(values, HyperParams):
        if values.family != family:
            raise ValueError(f"hyperparameters for {values.family.value} given to {family.value}")
        return values
    try:
        return HYPERPARAM_MODELS[family].model_validate(dict(values or {}))
    except ValidationError as e:
        raise ValueError(f"invalid {family.value} hyperparameters {values}: {e}") from e


# ===== Fitted models =====

class TrainedClassifier(ABC):
    """
    A fitted classifier exposing the class-1 probability
    Immutable after fit; safe to share across threads
    """

    family: ClassifierFamily

    def __init__(self, hp: HyperParams, feature_names: Sequence[str]):
        self.hp = hp
        self.feature_names: Tuple[str, ...] = tuple(feature_names)

    @abstractmethod
    def _proba(self, X: np.ndarray) -> np.ndarray:
        """Class-1 probabilities for a checked float matrix"""

    @property
    @abstractmethod
    def n_parameters(self) -> int:
        """Parameter count used to break best-model ties"""

    def check_input(self, X: np.ndarray, feature_names: Optional[Sequence[str]] = None) -> np.ndarray:
        """
        Validates the column layout of a prediction matrix
        Raises:
            FeatureMismatch: On different names or column count
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if feature_names is not None and tuple(feature_names) != self.feature_names:
            raise FeatureMismatch(
                f"{self.family.value} fitted on {list(self.feature_names)}, got {list(feature_names)}"
            )
        if X.shape[1] != len(self.feature_names):
            raise FeatureMismatch(
                f"{self.family.value} expects {len(self.feature_names)} columns, got {X.shape[1]}"
            )
        return X

    def predict_proba(self, X: np.ndarray, feature_names: Optional[Sequence[str]] = None) -> np.ndarray:
        """Class-1 probability per row, clipped to [0, 1]"""
        X = self.check_input(X, feature_names)
        return np.clip(self._proba(X), 0.0, 1.0)

    def predict(self, X: np.ndarray, feature_names: Optional[Sequence[str]] = None) -> np.ndarray:
        """Labels by proba > 0.5 (ties go to class 0)"""
        return (self.predict_proba(X, feature_names) > 0.5).astype(int)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.hp.describe()})"
