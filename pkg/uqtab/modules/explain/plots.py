"""
SHAP charts: mean |phi| bars, beeswarm, decision paths and a single-instance waterfall
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from uqtab.core.artifacts import ArtifactStore
from uqtab.core.seeds import derive_seed, make_rng
from uqtab.core.svg import LinearScale, axis_ticks, blend_color, fmt, padded_extent
from uqtab.core.templates import render_svg
from uqtab.modules.explain.services import ShapExplanation, global_ranking

logger = logging.getLogger(__name__)

POSITIVE = "#ff0d57"
NEGATIVE = "#1e88e5"
ROW_HEIGHT = 34.0


def _phi_matrix(explanations: Sequence[ShapExplanation]) -> np.ndarray:
    return np.vstack([e.phi for e in explanations])


def _ranked_indices(explanations: Sequence[ShapExplanation]) -> List[int]:
    """Column indices by mean |phi|, most important first"""
    names = list(explanations[0].feature_names)
    return [names.index(name) for name, _ in global_ranking(explanations)]


def waterfall_layout(explanation: ShapExplanation) -> List[Dict[str, float]]:
    """
    Steps from phi0, largest |phi| first; the last step ends at phi0 + sum(phi)
    """
    order = sorted(range(explanation.phi.shape[0]), key=lambda j: (-abs(explanation.phi[j]), j))
    running = explanation.phi0
    steps = []
    for j in order:
        phi = float(explanation.phi[j])
        steps.append({
            "feature": explanation.feature_names[j],
            "index": j,
            "value": float(explanation.instance[j]),
            "phi": phi,
            "start": running,
            "end": running + phi,
        })
        running += phi
    return steps


def decision_layout(explanations: Sequence[ShapExplanation]) -> Tuple[List[int], List[List[float]]]:
    """
    Feature order (least important first) and, per explanation, the
    cumulative output from phi0 through each feature in that order
    """
    order = list(reversed(_ranked_indices(explanations)))
    paths = []
    for e in explanations:
        path = [e.phi0]
        for j in order:
            path.append(path[-1] + float(e.phi[j]))
        paths.append(path)
    return order, paths


def render_bar(explanations: Sequence[ShapExplanation], title: str = "Mean |SHAP value|") -> str:
    ranking = global_ranking(explanations)
    width = 620
    height = int(90 + ROW_HEIGHT * len(ranking))
    x0, x1 = 170.0, float(width - 60)
    y_top = 50.0
    x_scale = LinearScale((0.0, max(v for _, v in ranking) or 1.0), (x0, x1))
    bars = []
    for i, (name, value) in enumerate(ranking):
        y = y_top + i * ROW_HEIGHT
        bars.append({
            "name": name,
            "x": x0,
            "y": y + 6,
            "width": x_scale(value) - x0,
            "height": ROW_HEIGHT - 12,
            "label": fmt(value, 3),
            "mid": y + ROW_HEIGHT / 2,
        })
    y_axis = y_top + ROW_HEIGHT * len(ranking)
    return render_svg("explain/templates/shap_bar.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y_top": y_top,
        "y_axis": y_axis,
        "bars": bars,
        "color": POSITIVE,
        "xticks": axis_ticks(x_scale, 5, 3),
    })


def render_beeswarm(explanations: Sequence[ShapExplanation], title: str = "SHAP beeswarm", seed: int = 0) -> str:
    """One row per feature; dot color is the feature value scaled over the explained rows"""
    phi = _phi_matrix(explanations)
    values = np.vstack([e.instance for e in explanations])
    ranked = _ranked_indices(explanations)
    names = explanations[0].feature_names

    width = 660
    height = int(100 + ROW_HEIGHT * len(ranked))
    x0, x1 = 170.0, float(width - 70)
    y_top = 50.0
    lo, hi = padded_extent(list(phi.ravel()) + [0.0])
    x_scale = LinearScale((lo, hi), (x0, x1))
    rng = make_rng(derive_seed(seed, "beeswarm"))

    rows = []
    dots = []
    for i, j in enumerate(ranked):
        center = y_top + (i + 0.5) * ROW_HEIGHT
        rows.append({"name": names[j], "y": center})
        column = values[:, j]
        span = column.max() - column.min()
        scaled = (column - column.min()) / span if span > 0 else np.full(column.shape, 0.5)
        jitter = rng.uniform(-0.35, 0.35, size=column.shape[0]) * ROW_HEIGHT
        for k in range(phi.shape[0]):
            dots.append({
                "x": x_scale(phi[k, j]),
                "y": center + jitter[k],
                "color": blend_color(scaled[k]),
                "title": f"{names[j]} = {fmt(column[k], 3)}: {fmt(phi[k, j], 4)}",
            })

    y_axis = y_top + ROW_HEIGHT * len(ranked)
    return render_svg("explain/templates/shap_beeswarm.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y_top": y_top,
        "y_axis": y_axis,
        "zero": x_scale(0.0),
        "rows": rows,
        "dots": dots,
        "xticks": axis_ticks(x_scale, 5, 2),
        "low_color": blend_color(0.0),
        "high_color": blend_color(1.0),
    })


def render_decision(explanations: Sequence[ShapExplanation], title: str = "SHAP decision plot") -> str:
    """Paths climb from phi0 (bottom) through features in increasing importance to f(x) (top)"""
    order, paths = decision_layout(explanations)
    names = explanations[0].feature_names
    width = 660
    height = int(110 + ROW_HEIGHT * len(order))
    x0, x1 = 170.0, float(width - 40)
    y_top = 50.0
    y_bottom = y_top + ROW_HEIGHT * len(order)
    lo, hi = padded_extent([v for path in paths for v in path])
    x_scale = LinearScale((lo, hi), (x0, x1))

    # level 0 at the bottom, last feature at the top
    def level_y(level: int) -> float:
        return y_bottom - level * ROW_HEIGHT

    lines = []
    for path in paths:
        points = " ".join(f"{fmt(x_scale(v))},{fmt(level_y(level))}" for level, v in enumerate(path))
        lines.append({
            "points": points,
            "color": blend_color(path[-1]),
            "title": f"f(x) = {fmt(path[-1], 4)}",
        })
    labels = [{"name": names[j], "y": level_y(level + 1) + ROW_HEIGHT / 2} for level, j in enumerate(order)]
    gridlines = [level_y(level) for level in range(len(order) + 1)]
    base = float(np.mean([p[0] for p in paths]))
    return render_svg("explain/templates/shap_decision.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y_top": level_y(len(order)),
        "y_bottom": y_bottom,
        "lines": lines,
        "labels": labels,
        "gridlines": gridlines,
        "base_x": x_scale(base),
        "base_label": fmt(base, 3),
        "xticks": axis_ticks(x_scale, 5, 2),
    })


def render_waterfall(explanation: ShapExplanation, title: str = "SHAP waterfall") -> str:
    steps = waterfall_layout(explanation)
    width = 680
    height = int(120 + ROW_HEIGHT * len(steps))
    x0, x1 = 220.0, float(width - 60)
    y_top = 60.0
    extent = [explanation.phi0, explanation.fx] + [s["start"] for s in steps] + [s["end"] for s in steps]
    lo, hi = padded_extent(extent, 0.1)
    x_scale = LinearScale((lo, hi), (x0, x1))

    bars = []
    for i, step in enumerate(steps):
        left, right = sorted((step["start"], step["end"]))
        bars.append({
            "name": f"{step['feature']} = {fmt(step['value'], 2)}",
            "x": x_scale(left),
            "y": y_top + i * ROW_HEIGHT + 6,
            "width": max(x_scale(right) - x_scale(left), 1.0),
            "height": ROW_HEIGHT - 12,
            "mid": y_top + (i + 0.5) * ROW_HEIGHT,
            "color": POSITIVE if step["phi"] >= 0 else NEGATIVE,
            "label": ("+" if step["phi"] >= 0 else "") + fmt(step["phi"], 3),
            "label_x": x_scale(right) + 4,
            "end_x": x_scale(step["end"]),
        })
    y_axis = y_top + ROW_HEIGHT * len(steps)
    final = steps[-1]["end"] if steps else explanation.phi0
    return render_svg("explain/templates/shap_waterfall.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y_top": y_top,
        "y_axis": y_axis,
        "bars": bars,
        "base_x": x_scale(explanation.phi0),
        "base_label": f"E[f(X)] = {fmt(explanation.phi0, 3)}",
        "fx_x": x_scale(final),
        "fx_label": f"f(x) = {fmt(final, 3)}",
        "xticks": axis_ticks(x_scale, 5, 2),
    })


def render_shap(
    explanations: Sequence[ShapExplanation],
    store: ArtifactStore,
    waterfall_instance: int = 0,
    seed: int = 0,
    subtitle: str = "",
) -> List[Path]:
    """
    Writes shap_bar.svg, shap_beeswarm.svg, shap_decision.svg and shap_waterfall.svg
    Args:
        explanations: At least one explanation
        store: Output location
        waterfall_instance: Position in explanations drawn by the waterfall
        seed: Beeswarm jitter seed
        subtitle: Appended to every chart title
    """
    if not explanations:
        raise ValueError("render_shap needs at least one explanation")
    if not 0 <= waterfall_instance < len(explanations):
        raise ValueError(f"waterfall instance {waterfall_instance} out of range 0..{len(explanations) - 1}")
    suffix = f" ({subtitle})" if subtitle else ""
    written = [
        store.write_svg("shap_bar.svg", render_bar(explanations, f"Mean |SHAP value|{suffix}")),
        store.write_svg("shap_beeswarm.svg", render_beeswarm(explanations, f"SHAP beeswarm{suffix}", seed)),
        store.write_svg("shap_decision.svg", render_decision(explanations, f"SHAP decision plot{suffix}")),
        store.write_svg(
            "shap_waterfall.svg",
            render_waterfall(explanations[waterfall_instance], f"SHAP waterfall, instance {waterfall_instance}{suffix}"),
        ),
    ]
    logger.info(f"Wrote {len(written)} SHAP charts to {store.plots_dir}")
    return written
