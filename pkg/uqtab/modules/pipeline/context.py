"""
Run context shared by the CLI stages
Loads the dataset once per process, splits, standardizes and resamples it,
and hands each stage the matrices it needs for a feature set
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from uqtab.config import RunConfig
from uqtab.core.artifacts import ArtifactStore
from uqtab.core.errors import EmptySelection
from uqtab.core.seeds import derive_seed
from uqtab.core.system import default_workers
from uqtab.modules.boruta.services import FeatureDecision
from uqtab.modules.data.schema import FeatureSchema, load_schema
from uqtab.modules.data.services import (
    DatasetTable,
    EncodedMatrix,
    LabelVector,
    SplitIndices,
    encode,
    load_csv,
    standardize,
    stratified_split,
)
from uqtab.modules.models.families.base import ClassifierFamily
from uqtab.modules.resample.services import SmoteConfig, smote

logger = logging.getLogger(__name__)

FULL = "full"
REDUCED = "reduced"
FEATURE_SETS = (FULL, REDUCED)


@dataclass(frozen=True)
class DataView:
    """
    Train / test / resampled matrices restricted to one feature set
    Scaled matrices feed distance and gradient models, raw ones feed trees
    """

    feature_set: str
    X_train_raw: EncodedMatrix
    X_test_raw: EncodedMatrix
    X_train_scaled: EncodedMatrix
    X_test_scaled: EncodedMatrix
    X_resampled_scaled: EncodedMatrix
    y_train: LabelVector
    y_test: LabelVector
    y_resampled: LabelVector

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return self.X_train_raw.feature_names

    @property
    def X_resampled_raw(self) -> EncodedMatrix:
        return self.X_resampled_scaled.unscaled()

    @property
    def metric_scale(self) -> np.ndarray:
        """Column stds that make raw-space SMOTE distances match scaled space"""
        return self.X_train_scaled.scaler.std

    def inputs(self, family: ClassifierFamily) -> Tuple[EncodedMatrix, EncodedMatrix, EncodedMatrix]:
        """(train, test, resampled train) in the family's input space"""
        if ClassifierFamily(family).uses_scaled_inputs:
            return self.X_train_scaled, self.X_test_scaled, self.X_resampled_scaled
        return self.X_train_raw, self.X_test_raw, self.X_resampled_raw


@dataclass(frozen=True)
class PreparedData:
    table: DatasetTable
    X: EncodedMatrix
    y: LabelVector
    split: SplitIndices
    full: DataView

    def view(self, names: Sequence[str], feature_set: str) -> DataView:
        full = self.full
        names = list(names)
        return DataView(
            feature_set=feature_set,
            X_train_raw=full.X_train_raw.select(names),
            X_test_raw=full.X_test_raw.select(names),
            X_train_scaled=full.X_train_scaled.select(names),
            X_test_scaled=full.X_test_scaled.select(names),
            X_resampled_scaled=full.X_resampled_scaled.select(names),
            y_train=full.y_train,
            y_test=full.y_test,
            y_resampled=full.y_resampled,
        )


def prepare(config: RunConfig, schema: FeatureSchema) -> PreparedData:
    """
    load -> encode -> stratified split -> standardize -> SMOTE on the train part
    SMOTE runs once in scaled space; tree learners get the same synthetic
    rows mapped back through the scaler
    """
    table = load_csv(config.dataset_path, schema)
    X, y = encode(table, schema)
    split = stratified_split(X, y, config.split_ratio, derive_seed(config.seed, "split"))
    X_train, X_test = X.take(split.train_idx), X.take(split.test_idx)
    y_train, y_test = y.take(split.train_idx), y.take(split.test_idx)

    if config.paper_faithful_scaling:
        scaled_all, _ = standardize(X)
        X_train_scaled = scaled_all.take(split.train_idx)
        X_test_scaled = scaled_all.take(split.test_idx)
        logger.info("Scaler fit on the full dataset before splitting")
    else:
        X_train_scaled, (X_test_scaled,) = standardize(X_train, [X_test])

    smote_cfg = SmoteConfig(
        k_neighbors=config.smote.k_neighbors,
        seed=derive_seed(config.seed, "smote"),
        target_ratio=config.smote.target_ratio,
    )
    X_resampled, y_resampled = smote(X_train_scaled, y_train, smote_cfg)
    negatives, positives = y_resampled.counts()
    logger.info(
        f"Prepared {table.n} rows: {split.train_idx.size} train / {split.test_idx.size} test, "
        f"resampled train {negatives}/{positives}"
    )

    full = DataView(
        feature_set=FULL,
        X_train_raw=X_train,
        X_test_raw=X_test,
        X_train_scaled=X_train_scaled,
        X_test_scaled=X_test_scaled,
        X_resampled_scaled=X_resampled,
        y_train=y_train,
        y_test=y_test,
        y_resampled=y_resampled,
    )
    return PreparedData(table=table, X=X, y=y, split=split, full=full)


class RunContext:
    """Configuration, output store and lazily prepared data of one invocation"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.store = ArtifactStore(config.output_dir)
        self._schema: Optional[FeatureSchema] = None
        self._data: Optional[PreparedData] = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def workers(self) -> int:
        return self.config.workers or default_workers()

    def stage_seed(self, *labels) -> int:
        return derive_seed(self.config.seed, *labels)

    @property
    def schema(self) -> FeatureSchema:
        if self._schema is None:
            self._schema = load_schema(self.config.schema_path)
        return self._schema

    @property
    def data(self) -> PreparedData:
        if self._data is None:
            self._data = prepare(self.config, self.schema)
        return self._data

    def decision(self) -> FeatureDecision:
        """Boruta decision written by the select stage"""
        payload = self.store.read_json("boruta.json", "select")
        return FeatureDecision.model_validate(payload["decision"])

    def view(self, feature_set: str) -> DataView:
        if feature_set == FULL:
            return self.data.full
        if feature_set == REDUCED:
            confirmed = self.decision().confirmed
            if not confirmed:
                raise EmptySelection("Boruta confirmed no feature; the reduced feature set is empty")
            return self.data.view(confirmed, REDUCED)
        raise ValueError(f"unknown feature set {feature_set!r}")

    def feature_sets(self, requested: str = "auto") -> List[str]:
        """'auto' is full, plus reduced once boruta.json exists"""
        if requested == "auto":
            return [FULL, REDUCED] if self.store.exists("boruta.json") else [FULL]
        if requested == "both":
            return [FULL, REDUCED]
        if requested not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {requested!r}")
        return [requested]
