"""
Bundled file locations
"""

from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent.parent
PACKAGE_DIR = BASE_DIR / "uqtab"
DATA_DIR = BASE_DIR / "data"

SCHEMA_PATH = DATA_DIR / "thyroid_schema.json"
DEFAULT_CONFIG_PATH = DATA_DIR / "default_config.yaml"
DATASET_PATH = DATA_DIR / "Thyroid_Diff.csv"
SAMPLE_DATASET_PATH = DATA_DIR / "thyroid_sample.csv"
