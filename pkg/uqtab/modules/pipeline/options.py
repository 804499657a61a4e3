"""
Command-line options shared by every stage command
"""

import functools
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click

from uqtab.config import load_run_config
from uqtab.modules.pipeline.context import RunContext

logger = logging.getLogger(__name__)


def split_list(text: Optional[str]) -> Optional[List[str]]:
    """'normal:0:1, laplace:0:1' -> ['normal:0:1', 'laplace:0:1']"""
    if text is None:
        return None
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise click.BadParameter("expected a comma-separated list")
    return items


def parse_instances(text: Optional[str]):
    """'test' or a comma-separated list of test-row indices"""
    if text is None or text == "test":
        return text
    try:
        return [int(item) for item in split_list(text)]
    except ValueError as e:
        raise click.BadParameter(f"--instances must be 'test' or integers: {text}") from e


def run_options(function: Callable) -> Callable:
    """Adds the options every stage accepts and collects them into `options`"""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="Run configuration (YAML or JSON)")
    @click.option("--seed", type=int, help="Master seed")
    @click.option("--out", "output_dir", type=click.Path(file_okay=False, path_type=Path), help="Output directory")
    @click.option("--priors", help="Comma-separated priors, e.g. 'normal:0:1,horseshoe:1'")
    @click.option("--paper-faithful-scaling", is_flag=True, help="Fit the scaler on all rows before splitting")
    @click.option("--paper-faithful-smote", is_flag=True, help="Cross-validate on the SMOTE-resampled training set")
    @click.option("--workers", type=click.IntRange(min=0), help="Thread pool size for grid cells, chains and SHAP rows (0 = one per core)")
    @click.option("--canonical", is_flag=True, help="Leave timestamp and host out of report provenance")
    @click.option("--band", type=click.Choice(["sd", "90"]), help="Uncertainty band width")
    @functools.wraps(function)
    def wrapper(config_path, seed, output_dir, priors, paper_faithful_scaling, paper_faithful_smote, workers, canonical, band, **kwargs):
        options = {
            "config_path": config_path,
            "overrides": {
                "seed": seed,
                "output_dir": str(output_dir) if output_dir else None,
                "priors": split_list(priors),
                "paper_faithful_scaling": True if paper_faithful_scaling else None,
                "paper_faithful_smote": True if paper_faithful_smote else None,
                "workers": workers,
                "canonical": True if canonical else None,
                "uncertainty_band": band,
            },
        }
        return function(options=options, **kwargs)

    return wrapper


def build_context(options: Dict[str, Any], **overrides: Any) -> RunContext:
    """
    Loads the run configuration with CLI overrides applied
    Raises:
        ConfigInvalid: Before any data is read
    """
    merged = {**options["overrides"], **{k: v for k, v in overrides.items() if v is not None}}
    config = load_run_config(options["config_path"], merged)
    logger.info(f"Run config {config.config_hash()[:12]}, seed {config.seed}, output {config.output_dir}")
    return RunContext(config)
