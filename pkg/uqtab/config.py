"""
Global application settings and the per-run configuration
"""

import hashlib
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from uqtab import __version__
from uqtab.core.errors import ConfigInvalid
from uqtab.core.paths import DATASET_PATH, DEFAULT_CONFIG_PATH, SCHEMA_PATH
from uqtab.modules.bayes.priors import SHIPPED_PRIORS, parse_prior
from uqtab.modules.models.families.base import ClassifierFamily, parse_hyperparams

logger = logging.getLogger(__name__)

load_dotenv()


class Settings:
    """Application settings"""

    APP_NAME: str = "uqtab"
    APP_VERSION: str = __version__
    LOG_LEVEL: str = os.getenv("UQTAB_LOG_LEVEL", "INFO")

    # Paths
    OUTPUT_DIR: str = os.getenv("UQTAB_OUTPUT_DIR", "out")
    CONFIG_PATH: str = os.getenv("UQTAB_CONFIG", str(DEFAULT_CONFIG_PATH))


settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class SmoteSettings(_Section):
    """SMOTE settings (seed comes from the master seed)"""

    k_neighbors: int = Field(5, ge=1)
    target_ratio: float = Field(1.0, gt=0.0, le=1.0)


class BorutaSettings(_Section):
    """Boruta settings; forest_hp defaults to 300 unlimited-depth trees"""

    max_iterations: int = Field(100, ge=10)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    n_trees: int = Field(300, ge=1)
    max_depth: Optional[int] = Field(None, ge=1)
    importance: Literal["gini", "permutation"] = "gini"
    resolve_tentative: bool = True


class NutsSettings(_Section):
    """NUTS settings shared by every prior"""

    warmup: int = Field(500, ge=1)
    draws: int = Field(1000, ge=1)
    max_tree_depth: int = Field(10, ge=1)
    target_accept: float = Field(0.8, gt=0.0, lt=1.0)
    heavy_tail_target_accept: float = Field(0.9, gt=0.0, lt=1.0)
    divergence_threshold: float = Field(1000.0, gt=0.0)
    chains: int = Field(2, ge=1)
    hidden_units: int = Field(5, ge=1)
    init_scale: float = Field(0.1, gt=0.0)


class ShapSettings(_Section):
    """Exact SHAP settings"""

    background_size: int = Field(100, ge=1)
    instances: Union[Literal["test"], List[int]] = "test"
    max_posterior_draws: int = Field(500, ge=1)
    waterfall_instance: int = Field(0, ge=0)
    target: Optional[str] = None


class RunConfig(_Section):
    """
    Configuration of one experiment run
    Every referenced path must exist when the run starts
    """

    dataset_path: Path = DATASET_PATH
    schema_path: Path = SCHEMA_PATH
    seed: int = Field(42, ge=0, lt=2**63)
    split_ratio: float = Field(0.8, gt=0.0, lt=1.0)
    smote: SmoteSettings = SmoteSettings()
    boruta: BorutaSettings = BorutaSettings()
    families: List[ClassifierFamily] = Field(default_factory=lambda: list(ClassifierFamily))
    model_grids: Dict[ClassifierFamily, List[Dict[str, Any]]] = Field(default_factory=dict)
    cv_folds: List[int] = Field(default_factory=lambda: [2, 5, 10])
    nuts: NutsSettings = NutsSettings()
    priors: List[str] = Field(default_factory=lambda: list(SHIPPED_PRIORS))
    shap: ShapSettings = ShapSettings()
    uncertainty_band: Literal["sd", "90"] = "sd"
    output_dir: Path = Path(settings.OUTPUT_DIR)
    paper_faithful_scaling: bool = False
    paper_faithful_smote: bool = False
    workers: int = Field(1, ge=0)
    canonical: bool = False

    @field_validator("cv_folds")
    @classmethod
    def _check_folds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("cv_folds must not be empty")
        for folds in value:
            if folds not in (2, 5, 10):
                raise ValueError(f"fold count {folds} not in {{2, 5, 10}}")
        return sorted(set(value))

    @field_validator("model_grids")
    @classmethod
    def _check_grids(cls, value: Dict[ClassifierFamily, List[Dict[str, Any]]]) -> Dict[ClassifierFamily, List[Dict[str, Any]]]:
        for family, grid in value.items():
            if not grid:
                raise ValueError(f"grid for {family.value} must not be empty")
            for cell in grid:
                parse_hyperparams(family, cell)
        return value

    @field_validator("priors")
    @classmethod
    def _check_priors(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one prior is required")
        for text in value:
            parse_prior(text)
        return value

    @model_validator(mode="after")
    def _check_paths(self) -> "RunConfig":
        for label, path in (("dataset_path", self.dataset_path), ("schema_path", self.schema_path)):
            if not Path(path).exists():
                raise ValueError(f"{label} does not exist: {path}")
        return self

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the output directory"""
        payload = self.model_dump_json(exclude={"output_dir", "workers", "canonical"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Loads a run configuration from YAML/JSON and applies CLI overrides
    Args:
        path: Config file; the bundled default when None
        overrides: Top-level keys replacing file values (None values ignored)
    Returns:
        Validated RunConfig
    Raises:
        ConfigInvalid: If the file is unreadable or validation fails
    """
    config_path = Path(path) if path else Path(settings.CONFIG_PATH)
    data: Dict[str, Any] = {}
    if config_path.exists():
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (yaml.YAMLError, IOError) as e:
            raise ConfigInvalid(f"Cannot read config {config_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigInvalid(f"Config {config_path} must be a mapping")
        # relative paths in a config file are resolved against the file's directory
        for key in ("dataset_path", "schema_path"):
            if key in data and not Path(data[key]).is_absolute():
                data[key] = str((config_path.parent / data[key]).resolve())
    elif path is not None:
        raise ConfigInvalid(f"Config file not found: {config_path}")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"Invalid configuration: {e}") from e

    logger.debug(f"Loaded run config from {config_path} (hash {config.config_hash()[:12]})")
    return config
