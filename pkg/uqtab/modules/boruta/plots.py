"""
Box plot of per-iteration importances, colored by Boruta status
"""

import numpy as np

from uqtab.core.svg import LinearScale, axis_ticks, padded_extent
from uqtab.core.templates import render_svg
from uqtab.modules.boruta.services import CONFIRMED, REJECTED, TENTATIVE, FeatureDecision

STATUS_COLORS = {
    CONFIRMED: "#55a868",
    TENTATIVE: "#e6c229",
    REJECTED: "#c44e52",
    "Shadow max": "#4c72b0",
}


def render_importance_box(decision: FeatureDecision, title: str = "Boruta feature importance") -> str:
    """Features sorted by median importance, plus the shadow-max distribution"""
    series = {name: decision.importance_series(name) for name in decision.feature_names}
    series = {k: v for k, v in series.items() if v}
    entries = sorted(series.items(), key=lambda kv: float(np.median(kv[1])))
    entries.append(("Shadow max", list(decision.shadow_max_history)))

    width = max(560, 90 + 46 * len(entries))
    height = 420
    x0, x1 = 70.0, float(width - 20)
    y0, y1 = float(height - 110), 50.0
    all_values = [v for _, vals in entries for v in vals] or [0.0, 1.0]
    lo, hi = padded_extent(all_values)
    y_scale = LinearScale((min(lo, 0.0), hi), (y0, y1))
    slot = (x1 - x0) / len(entries)

    boxes = []
    for i, (name, values) in enumerate(entries):
        q0, q1, q2, q3, q4 = np.percentile(values, [0, 25, 50, 75, 100])
        status = "Shadow max" if name == "Shadow max" else decision.status[name]
        box_width = 0.6 * slot
        boxes.append({
            "name": name,
            "x": x0 + i * slot + 0.2 * slot,
            "center": x0 + (i + 0.5) * slot,
            "width": box_width,
            "low": y_scale(q0),
            "q1": y_scale(q1),
            "median": y_scale(q2),
            "q3": y_scale(q3),
            "high": y_scale(q4),
            "color": STATUS_COLORS[status],
            "title": f"{name} ({status}): median {q2:.4f}",
        })

    return render_svg("boruta/templates/importance_box.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y0": y0,
        "y1": y1,
        "boxes": boxes,
        "yticks": axis_ticks(y_scale, 5, 3),
        "legend": [{"label": k, "color": v} for k, v in STATUS_COLORS.items()],
    })
