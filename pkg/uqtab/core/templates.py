"""
Shared Jinja2 templates management for SVG charts
"""

from pathlib import Path
from typing import Any, Dict

from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

from uqtab.core.svg import fmt

# Paths
BASE_DIR = Path(__file__).resolve().parent.parent
SHARED_TEMPLATES_DIR = BASE_DIR / "shared" / "templates"
MODULES_DIR = BASE_DIR / "modules"

# Create Jinja2 Environment with multiple directories
# Order is important - chart_base.svg.j2 needs to be accessible from the first directory
env = Environment(
    loader=FileSystemLoader(
        [
            str(SHARED_TEMPLATES_DIR),  # shared templates - accessible as "chart_base.svg.j2"
            str(MODULES_DIR),  # module templates - accessible as "explain/templates/shap_bar.svg.j2"
        ]
    ),
    autoescape=select_autoescape(["svg", "xml", "j2"], default_for_string=True),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)

# Number formatting helper for coordinates and labels
env.filters["fmt"] = fmt


def render_svg(name: str, context: Dict[str, Any]) -> str:
    """
    Renders an SVG template
    Args:
        name: Template path relative to a loader directory
        context: Geometry and labels computed by the caller
    Returns:
        SVG document text
    """
    template = env.get_template(name)
    return template.render(**context)
