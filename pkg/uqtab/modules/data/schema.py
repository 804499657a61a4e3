"""
Feature schema: column kinds, ordinal level orders and header aliases
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from uqtab.core.errors import ConfigInvalid

logger = logging.getLogger(__name__)

ColumnKind = Literal["numeric", "binary", "nominal", "ordinal"]

TARGET_NAME = "Recurred"


class ColumnSpec(BaseModel):
    """
    One schema column
    levels: declared categories; ascending severity for ordinal columns,
    code order for binary columns, the closed level set for nominal columns
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    kind: ColumnKind
    levels: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check_levels(self) -> "ColumnSpec":
        if self.kind == "numeric":
            if self.levels:
                raise ValueError(f"numeric column {self.name!r} cannot declare levels")
            return self
        if not self.levels:
            raise ValueError(f"{self.kind} column {self.name!r} needs levels")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"column {self.name!r} has duplicate levels")
        if self.kind == "binary" and len(self.levels) != 2:
            raise ValueError(f"binary column {self.name!r} needs exactly 2 levels")
        return self

    @property
    def is_categorical(self) -> bool:
        return self.kind != "numeric"


class FeatureSchema(BaseModel):
    """Ordered columns with exactly one binary target"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = ""
    target: str = TARGET_NAME
    aliases: Dict[str, str] = {}
    columns: List[ColumnSpec]

    @model_validator(mode="after")
    def _check_target(self) -> "FeatureSchema":
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        if self.target != TARGET_NAME:
            raise ValueError(f"target column must be named {TARGET_NAME!r}, got {self.target!r}")
        matches = [c for c in self.columns if c.name == self.target]
        if len(matches) != 1:
            raise ValueError(f"schema must contain the target column {self.target!r} exactly once")
        if matches[0].kind != "binary":
            raise ValueError(f"target column {self.target!r} must be binary")
        if len(self.columns) < 2:
            raise ValueError("schema needs at least one feature column")
        return self

    @property
    def column_names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def feature_columns(self) -> List[ColumnSpec]:
        return [c for c in self.columns if c.name != self.target]

    @property
    def feature_names(self) -> List[str]:
        return [c.name for c in self.feature_columns]

    @property
    def target_column(self) -> ColumnSpec:
        return self.column(self.target)

    def column(self, name: str) -> ColumnSpec:
        for column in self.columns:
            if column.name == name:
                return column
        raise KeyError(name)

    def canonical_name(self, header: str) -> str:
        """Maps a CSV header onto the schema name through the alias map"""
        header = header.strip()
        return self.aliases.get(header, header)


def load_schema(path: Path) -> FeatureSchema:
    """
    Loads a schema JSON document
    Raises:
        ConfigInvalid: If the file is unreadable or malformed
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        schema = FeatureSchema.model_validate(data)
    except (IOError, json.JSONDecodeError) as e:
        raise ConfigInvalid(f"Cannot read schema {path}: {e}") from e
    except ValidationError as e:
        raise ConfigInvalid(f"Invalid schema {path}: {e}") from e

    logger.debug(f"Loaded schema {schema.name or path} with {len(schema.feature_columns)} features")
    return schema
