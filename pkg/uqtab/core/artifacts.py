"""
Artifact store - reading and writing stage outputs
All stage outputs go through one store so reruns overwrite with identical bytes
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from uqtab.core.errors import StageDependencyMissing

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def to_jsonable(value: Any) -> Any:
    """
    Converts numpy scalars/arrays and non-finite floats into plain JSON values
    NaN and infinities become None
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(data: Any) -> str:
    """Serializes with sorted keys so equal data gives equal bytes"""
    return json.dumps(to_jsonable(data), indent=2, ensure_ascii=False, sort_keys=True) + "\n"


class ArtifactStore:
    """
    Output directory of a run
    Layout:
        <out>/*.json, <out>/*.csv, <out>/plots/*.svg
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.plots_dir = self.out_dir / "plots"

    def ensure_dirs(self) -> None:
        """Creates the output directories if they don't exist"""
        self.plots_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def require(self, name: str, stage: str) -> Path:
        """
        Returns the path of a prior stage output
        Raises:
            StageDependencyMissing: If the file is absent
        """
        target = self.path(name)
        if not target.exists():
            raise StageDependencyMissing(
                f"{name} not found in {self.out_dir}; run 'uqtab {stage}' first"
            )
        return target

    def write_json(self, name: str, data: Any) -> Path:
        """Writes canonical JSON"""
        self.ensure_dirs()
        target = self.path(name)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(canonical_json(data))
        logger.debug(f"Wrote {target}")
        return target

    def read_json(self, name: str, stage: Optional[str] = None) -> Dict[str, Any]:
        """Reads a JSON artifact (checked as a dependency when stage is given)"""
        target = self.require(name, stage) if stage else self.path(name)
        with open(target, "r", encoding="utf-8") as f:
            return json.load(f)

    def write_matrix(self, name: str, matrix: np.ndarray, columns: Sequence[str]) -> Path:
        """Writes a matrix as CSV with round-trip float formatting"""
        self.ensure_dirs()
        target = self.path(name)
        frame = pd.DataFrame(np.asarray(matrix, dtype=float), columns=list(columns))
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {target} ({frame.shape[0]}x{frame.shape[1]})")
        return target

    def read_matrix(self, name: str, stage: Optional[str] = None) -> pd.DataFrame:
        """Reads a CSV matrix written by write_matrix"""
        target = self.require(name, stage) if stage else self.path(name)
        return pd.read_csv(target, float_precision="round_trip")

    def write_table(self, name: str, rows: List[Dict[str, Any]], columns: Sequence[str]) -> Path:
        """Writes a list of records as CSV"""
        self.ensure_dirs()
        target = self.path(name)
        frame = pd.DataFrame([to_jsonable(r) for r in rows], columns=list(columns))
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {target} ({len(rows)} rows)")
        return target

    def write_svg(self, name: str, content: str) -> Path:
        """Writes an SVG document under plots/"""
        self.ensure_dirs()
        target = self.plots_dir / name
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        logger.debug(f"Wrote {target}")
        return target
