"""
Logic for Data module
CSV ingestion, encoding/decoding, standardization, stratified splitting
and descriptive statistics
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from uqtab.core.errors import ClassTooSmall, EmptyFile, MissingColumn, MissingValue, UnknownLevel
from uqtab.core.seeds import make_rng
from uqtab.modules.data.schema import FeatureSchema

logger = logging.getLogger(__name__)

HISTOGRAM_BIN_WIDTH = 5


# ===== Domain types =====

@dataclass(frozen=True, eq=False)
class DatasetTable:
    """
    Parsed records in schema column order
    Numeric columns hold floats, categorical columns hold level texts
    """

    frame: pd.DataFrame
    schema: FeatureSchema

    @property
    def n(self) -> int:
        return int(self.frame.shape[0])

    @property
    def rows(self) -> List[Dict[str, object]]:
        return self.frame.to_dict(orient="records")


@dataclass(frozen=True, eq=False)
class Scaler:
    """
    Per-column (mean, stddev) fitted on a training matrix
    Constant columns keep mean 0 / stddev 1 so they pass through unchanged
    """

    feature_names: Tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray, feature_names: Sequence[str]) -> "Scaler":
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        if n >= 2:
            mean = values.mean(axis=0)
            std = values.std(axis=0, ddof=1)
        else:
            mean = np.zeros(values.shape[1])
            std = np.zeros(values.shape[1])
        constant = ~(np.isfinite(std) & (std > 0))
        mean = np.where(constant, 0.0, mean)
        std = np.where(constant, 1.0, std)
        return cls(tuple(feature_names), mean, std, constant)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std + self.mean

    def subset(self, names: Sequence[str]) -> "Scaler":
        idx = [self.feature_names.index(n) for n in names]
        return Scaler(tuple(names), self.mean[idx], self.std[idx], self.constant[idx])

    @property
    def constant_columns(self) -> List[str]:
        return [n for n, c in zip(self.feature_names, self.constant) if c]


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    """
    Numeric design matrix with its encoding map and optional scaler
    encoding_map: column -> {level: code} for every categorical feature
    """

    values: np.ndarray
    feature_names: Tuple[str, ...]
    encoding_map: Dict[str, Dict[str, int]] = field(default_factory=dict)
    scaler: Optional[Scaler] = None

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    @property
    def is_scaled(self) -> bool:
        return self.scaler is not None

    def take(self, idx: Sequence[int]) -> "EncodedMatrix":
        """Row subset"""
        return replace(self, values=self.values[np.asarray(idx, dtype=int)])

    def with_values(self, values: np.ndarray) -> "EncodedMatrix":
        return replace(self, values=np.asarray(values, dtype=float))

    def select(self, names: Sequence[str]) -> "EncodedMatrix":
        """Column subset in the given order"""
        idx = [self.feature_names.index(n) for n in names]
        return EncodedMatrix(
            values=self.values[:, idx],
            feature_names=tuple(names),
            encoding_map={k: v for k, v in self.encoding_map.items() if k in names},
            scaler=self.scaler.subset(names) if self.scaler is not None else None,
        )

    def unscaled(self) -> "EncodedMatrix":
        """Values in encoding units"""
        if self.scaler is None:
            return self
        return replace(self, values=self.scaler.inverse_transform(self.values), scaler=None)


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Binary targets, 1 = recurred"""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "labels", labels.astype(int))

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def take(self, idx: Sequence[int]) -> "LabelVector":
        return LabelVector(self.labels[np.asarray(idx, dtype=int)])

    def counts(self) -> Tuple[int, int]:
        """(negatives, positives)"""
        positives = int(self.labels.sum())
        return self.n - positives, positives


@dataclass(frozen=True, eq=False)
class SplitIndices:
    """Disjoint sorted train/test row indices"""

    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    ratio: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "ratio": self.ratio,
            "train_idx": self.train_idx.tolist(),
            "test_idx": self.test_idx.tolist(),
        }


class NumericSummary(BaseModel):
    min: float
    max: float
    mean: float
    stddev: float
    stddev_undefined: bool = False


class LevelCount(BaseModel):
    level: str
    total: int
    by_target: Dict[str, int]
    percent_of_total: Dict[str, float]


class HistogramBin(BaseModel):
    lower: float
    upper: float
    by_target: Dict[str, int]


class StatsReport(BaseModel):
    """Descriptive statistics of a table"""

    n: int
    target: str
    target_counts: Dict[str, int]
    target_percent: Dict[str, float]
    numeric: Dict[str, NumericSummary]
    categorical: Dict[str, List[LevelCount]]
    histogram_column: Optional[str] = None
    histogram: List[HistogramBin] = []


# ===== Ingestion =====

def load_csv(path: Path, schema: FeatureSchema) -> DatasetTable:
    """
    Loads a UTF-8 comma-separated file with a header row
    Args:
        path: CSV file
        schema: Columns to parse; headers are matched through schema.aliases
    Returns:
        DatasetTable in schema column order (extra CSV columns are dropped)
    Raises:
        EmptyFile: No header or no data rows
        MissingColumn: A schema column is absent
        MissingValue: An empty cell (rows are numbered from 1, header excluded)
        UnknownLevel: A category the schema does not declare, or a non-numeric
            value in a numeric column
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise EmptyFile(f"{path} is empty") from e

    raw.columns = [schema.canonical_name(str(c)) for c in raw.columns]
    for name in schema.column_names:
        if name not in raw.columns:
            raise MissingColumn(name)
    extra = [c for c in raw.columns if c not in schema.column_names]
    if extra:
        logger.warning(f"Ignoring columns not in schema: {extra}")
    if raw.shape[0] == 0:
        raise EmptyFile(f"{path} has a header but no data rows")

    parsed: Dict[str, pd.Series] = {}
    for column in schema.columns:
        cells = raw[column.name].astype(str).str.strip()
        empty = np.flatnonzero((cells == "").to_numpy())
        if empty.size:
            raise MissingValue(int(empty[0]) + 1, column.name)

        if column.kind == "numeric":
            numbers = pd.to_numeric(cells, errors="coerce").astype(float)
            bad = np.flatnonzero(~np.isfinite(numbers.to_numpy()))
            if bad.size:
                row = int(bad[0])
                raise UnknownLevel(row + 1, column.name, cells.iloc[row])
            parsed[column.name] = numbers
        else:
            unknown = np.flatnonzero(~cells.isin(column.levels).to_numpy())
            if unknown.size:
                row = int(unknown[0])
                raise UnknownLevel(row + 1, column.name, cells.iloc[row])
            parsed[column.name] = cells

    frame = pd.DataFrame(parsed, columns=schema.column_names).reset_index(drop=True)
    logger.info(f"Loaded {frame.shape[0]} rows from {path}")
    return DatasetTable(frame=frame, schema=schema)


# ===== Descriptive statistics =====

def descriptive_stats(table: DatasetTable) -> StatsReport:
    """
    Numeric summaries (sample stddev) and per-level counts cross-tabulated
    by the target, with percentages of the total row count
    Raises:
        ValueError: On an empty table
    """
    if table.n == 0:
        raise ValueError("descriptive_stats needs at least one row")

    schema = table.schema
    frame = table.frame
    n = table.n
    target_levels = schema.target_column.levels
    target = frame[schema.target]

    target_counts = {lvl: int((target == lvl).sum()) for lvl in target_levels}
    target_percent = {lvl: 100.0 * c / n for lvl, c in target_counts.items()}

    numeric: Dict[str, NumericSummary] = {}
    categorical: Dict[str, List[LevelCount]] = {}
    for column in schema.feature_columns:
        series = frame[column.name]
        if column.kind == "numeric":
            values = series.to_numpy(dtype=float)
            undefined = n < 2
            numeric[column.name] = NumericSummary(
                min=float(values.min()),
                max=float(values.max()),
                mean=float(values.mean()),
                stddev=0.0 if undefined else float(values.std(ddof=1)),
                stddev_undefined=undefined,
            )
            continue

        table_counts = pd.crosstab(series, target).reindex(
            index=column.levels, columns=target_levels, fill_value=0
        )
        rows = []
        for level in column.levels:
            by_target = {t: int(table_counts.at[level, t]) for t in target_levels}
            rows.append(
                LevelCount(
                    level=level,
                    total=sum(by_target.values()),
                    by_target=by_target,
                    percent_of_total={t: 100.0 * c / n for t, c in by_target.items()},
                )
            )
        categorical[column.name] = rows

    histogram_column = next((c.name for c in schema.feature_columns if c.kind == "numeric"), None)
    histogram = _histogram(frame, histogram_column, schema.target, target_levels) if histogram_column else []

    logger.debug(f"Computed statistics for {n} rows")
    return StatsReport(
        n=n,
        target=schema.target,
        target_counts=target_counts,
        target_percent=target_percent,
        numeric=numeric,
        categorical=categorical,
        histogram_column=histogram_column,
        histogram=histogram,
    )


def _histogram(frame: pd.DataFrame, column: str, target: str, target_levels: List[str]) -> List[HistogramBin]:
    """Fixed-width bins; the last bin is closed on the right"""
    values = frame[column].to_numpy(dtype=float)
    lo = math.floor(values.min() / HISTOGRAM_BIN_WIDTH) * HISTOGRAM_BIN_WIDTH
    hi = max(math.ceil(values.max() / HISTOGRAM_BIN_WIDTH) * HISTOGRAM_BIN_WIDTH, lo + HISTOGRAM_BIN_WIDTH)
    edges = np.arange(lo, hi + HISTOGRAM_BIN_WIDTH, HISTOGRAM_BIN_WIDTH, dtype=float)
    bins = []
    labels = frame[target].to_numpy()
    for i in range(edges.size - 1):
        lower, upper = edges[i], edges[i + 1]
        last = i == edges.size - 2
        mask = (values >= lower) & ((values <= upper) if last else (values < upper))
        bins.append(
            HistogramBin(
                lower=float(lower),
                upper=float(upper),
                by_target={t: int(np.sum(mask & (labels == t))) for t in target_levels},
            )
        )
    return bins


# ===== Encoding =====

def build_encoding_map(table: DatasetTable) -> Dict[str, Dict[str, int]]:
    """
    Level -> code per categorical feature
    Ordinal and binary columns follow the declared order; nominal columns
    follow first appearance in the table, then any unseen declared levels
    """
    encoding: Dict[str, Dict[str, int]] = {}
    for column in table.schema.feature_columns:
        if column.kind == "numeric":
            continue
        if column.kind == "nominal":
            seen = list(pd.unique(table.frame[column.name]))
            order = seen + [lvl for lvl in column.levels if lvl not in seen]
        else:
            order = list(column.levels)
        encoding[column.name] = {lvl: code for code, lvl in enumerate(order)}
    return encoding


def encode(
    table: DatasetTable,
    schema: Optional[FeatureSchema] = None,
    encoding_map: Optional[Dict[str, Dict[str, int]]] = None,
) -> Tuple[EncodedMatrix, LabelVector]:
    """
    Encodes a table into a numeric matrix and a label vector
    Args:
        table: Parsed records
        schema: Defaults to the table's schema
        encoding_map: Reuse a map built on another table (e.g. the full dataset)
    Returns:
        (EncodedMatrix without scaler, LabelVector)
    """
    schema = schema or table.schema
    encoding = encoding_map if encoding_map is not None else build_encoding_map(table)

    columns = []
    for column in schema.feature_columns:
        series = table.frame[column.name]
        if column.kind == "numeric":
            columns.append(series.to_numpy(dtype=float))
        else:
            columns.append(series.map(encoding[column.name]).to_numpy(dtype=float))
    values = np.column_stack(columns) if columns else np.zeros((table.n, 0))

    target_levels = schema.target_column.levels
    labels = (table.frame[schema.target] == target_levels[1]).to_numpy().astype(int)

    matrix = EncodedMatrix(values=values, feature_names=tuple(schema.feature_names), encoding_map=encoding)
    return matrix, LabelVector(labels)


def decode(matrix: EncodedMatrix, schema: FeatureSchema, labels: Optional[LabelVector] = None) -> DatasetTable:
    """
    Inverse of encode
    Scaled matrices are inverse-scaled first; fractional category codes
    (SMOTE synthetics) are rounded to the nearest declared code
    """
    values = matrix.unscaled().values
    data: Dict[str, object] = {}
    for j, name in enumerate(matrix.feature_names):
        column = schema.column(name)
        if column.kind == "numeric":
            data[name] = values[:, j].astype(float)
            continue
        inverse = {code: lvl for lvl, code in matrix.encoding_map[name].items()}
        codes = np.clip(np.rint(values[:, j]), 0, len(inverse) - 1).astype(int)
        data[name] = [inverse[c] for c in codes]

    columns = list(matrix.feature_names)
    if labels is not None:
        target_levels = schema.target_column.levels
        data[schema.target] = [target_levels[int(v)] for v in labels.labels]
        columns = [c for c in schema.column_names if c in data]
    frame = pd.DataFrame(data, columns=columns)
    return DatasetTable(frame=frame, schema=schema)


# ===== Scaling =====

def standardize(
    train: EncodedMatrix, others: Sequence[EncodedMatrix] = ()
) -> Tuple[EncodedMatrix, List[EncodedMatrix]]:
    """
    Z-scores every column with the TRAIN mean and sample stddev
    Constant train columns are left unscaled and flagged on the scaler
    Args:
        train: Matrix the scaler is fit on
        others: Matrices transformed with the same scaler
    Returns:
        (scaled train, list of scaled others)
    """
    if train.n == 0:
        raise ValueError("standardize needs a non-empty train matrix")
    base = train.unscaled()
    scaler = Scaler.fit(base.values, base.feature_names)
    if scaler.constant_columns:
        logger.warning(f"Constant columns left unscaled: {scaler.constant_columns}")

    def apply(matrix: EncodedMatrix) -> EncodedMatrix:
        if matrix.feature_names != base.feature_names:
            raise ValueError("standardize: matrices have different columns")
        raw = matrix.unscaled()
        return replace(raw, values=scaler.transform(raw.values), scaler=scaler)

    return apply(base), [apply(m) for m in others]


# ===== Splitting =====

def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def stratified_split(X: EncodedMatrix, y: LabelVector, ratio: float, seed: int) -> SplitIndices:
    """
    Per-class shuffled split with round(ratio * class size) training rows
    Raises:
        ClassTooSmall: If a class has fewer than 2 members
        ValueError: If ratio is outside (0, 1) or X and y differ in length
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if X.n != y.n:
        raise ValueError(f"matrix has {X.n} rows, labels have {y.n}")

    rng = make_rng(seed)
    train_parts = []
    test_parts = []
    for cls in (0, 1):
        members = np.flatnonzero(y.labels == cls)
        if members.size < 2:
            raise ClassTooSmall(f"class {cls} has {members.size} rows; a stratified split needs at least 2")
        n_train = min(max(round_half_up(ratio * members.size), 1), members.size - 1)
        shuffled = rng.permutation(members)
        train_parts.append(shuffled[:n_train])
        test_parts.append(shuffled[n_train:])

    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    logger.debug(f"Split {y.n} rows into {train_idx.size} train / {test_idx.size} test")
    return SplitIndices(train_idx=train_idx, test_idx=test_idx, seed=int(seed), ratio=float(ratio))


def stratified_folds(y: np.ndarray, folds: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    Assigns rows to k stratified folds
    Each class is shuffled and dealt round-robin over the folds
    Returns:
        List of k sorted validation index arrays
    Raises:
        ClassTooSmall: If a class has fewer members than folds
    """
    y = np.asarray(y)
    assignment = np.empty(y.shape[0], dtype=int)
    offset = 0
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if members.size < folds:
            raise ClassTooSmall(f"class {cls} has {members.size} rows, fewer than {folds} folds")
        shuffled = rng.permutation(members)
        assignment[shuffled] = (np.arange(shuffled.size) + offset) % folds
        offset += shuffled.size
    return [np.flatnonzero(assignment == k) for k in range(folds)]
