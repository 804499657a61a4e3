"""
Shared fixtures: a small thyroid-shaped dataset with its schema, and run
configurations sized for tests
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from uqtab.config import load_run_config
from uqtab.core.paths import SAMPLE_DATASET_PATH, SCHEMA_PATH
from uqtab.modules.data.schema import load_schema

SMALL_SCHEMA = {
    "name": "thyroid-subset",
    "target": "Recurred",
    "aliases": {"Hx Radiothreapy": "Hx Radiotherapy"},
    "columns": [
        {"name": "Age", "kind": "numeric"},
        {"name": "Gender", "kind": "binary", "levels": ["F", "M"]},
        {"name": "Adenopathy", "kind": "nominal", "levels": ["No", "Right", "Left", "Bilateral"]},
        {"name": "Risk", "kind": "ordinal", "levels": ["Low", "Intermediate", "High"]},
        {"name": "Response", "kind": "ordinal", "levels": [
            "Excellent", "Indeterminate", "Biochemical Incomplete", "Structural Incomplete"
        ]},
        {"name": "Recurred", "kind": "binary", "levels": ["No", "Yes"]},
    ],
}


def make_thyroid_frame(n: int = 120, seed: int = 7) -> pd.DataFrame:
    """Recurrence driven mostly by Response and Risk, roughly 30% positive"""
    rng = np.random.default_rng(seed)
    response = rng.choice(4, size=n, p=[0.5, 0.2, 0.1, 0.2])
    risk = rng.choice(3, size=n, p=[0.6, 0.3, 0.1])
    logits = -3.0 + 1.6 * response + 1.2 * risk
    recurred = rng.random(n) < 1.0 / (1.0 + np.exp(-logits))
    schema = {c["name"]: c.get("levels") for c in SMALL_SCHEMA["columns"]}
    return pd.DataFrame({
        "Age": rng.integers(15, 83, size=n),
        "Gender": rng.choice(schema["Gender"], size=n, p=[0.8, 0.2]),
        "Adenopathy": rng.choice(schema["Adenopathy"], size=n),
        "Risk": [schema["Risk"][i] for i in risk],
        "Response": [schema["Response"][i] for i in response],
        "Recurred": np.where(recurred, "Yes", "No"),
    })


@pytest.fixture
def schema_path(tmp_path: Path) -> Path:
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(SMALL_SCHEMA), encoding="utf-8")
    return path


@pytest.fixture
def schema(schema_path):
    return load_schema(schema_path)


@pytest.fixture
def thyroid_csv(tmp_path: Path) -> Path:
    path = tmp_path / "thyroid.csv"
    make_thyroid_frame().to_csv(path, index=False)
    return path


@pytest.fixture
def small_nuts() -> dict:
    return {"warmup": 60, "draws": 40, "chains": 2, "max_tree_depth": 5}


@pytest.fixture
def run_overrides(tmp_path, thyroid_csv, schema_path, small_nuts) -> dict:
    """Config overrides for a quick end-to-end run"""
    return {
        "dataset_path": str(thyroid_csv),
        "schema_path": str(schema_path),
        "output_dir": str(tmp_path / "out"),
        "seed": 11,
        "families": ["LOGISTIC", "NAIVE_BAYES", "DECISION_TREE"],
        "model_grids": {
            "LOGISTIC": [{"l2_lambda": 0.0}, {"l2_lambda": 0.1}],
            "DECISION_TREE": [{"max_depth": 2}, {"max_depth": 4}],
        },
        "cv_folds": [2, 5],
        "boruta": {"max_iterations": 20, "n_trees": 25},
        "nuts": small_nuts,
        "priors": ["normal:0:1", "laplace:0:1"],
        "shap": {"background_size": 12, "instances": [0, 1, 2, 3], "max_posterior_draws": 20},
        "canonical": True,
    }


@pytest.fixture
def run_config(tmp_path, run_overrides):
    return load_run_config(None, run_overrides)


@pytest.fixture
def bundled_schema():
    return load_schema(SCHEMA_PATH)

@pytest.fixture
def sample_overrides(run_overrides) -> dict:
    """Quick-run overrides on the bundled sample file and the full bundled schema"""
    return {
        **run_overrides,
        "dataset_path": str(SAMPLE_DATASET_PATH),
        "schema_path": str(SCHEMA_PATH),
        "families": ["LOGISTIC", "DECISION_TREE"],
        "priors": ["normal:0:1"],
        "shap": {"background_size": 8, "instances": [0, 1], "max_posterior_draws": 10},
    }
