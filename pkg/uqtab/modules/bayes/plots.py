"""
SVG charts for the Bayes module: predictive mean with an uncertainty band
"""

from typing import Optional

import numpy as np

from uqtab.core.svg import LinearScale, axis_ticks, fmt
from uqtab.core.templates import render_svg
from uqtab.modules.bayes.services import UncertaintyReport

BAND_COLORS = {"epistemic": "#4c72b0", "aleatoric": "#dd8452"}


def render_uncertainty(
    report: UncertaintyReport,
    kind: str,
    title: str,
    width_kind: str = "sd",
    labels: Optional[np.ndarray] = None,
) -> str:
    """
    Posterior predictive mean over test instances sorted by that mean,
    shaded by +-z*sqrt(epistemic or aleatoric variance), clipped to [0, 1]
    Args:
        report: Per-instance mean and variance split
        kind: "epistemic" or "aleatoric"
        title: Chart title
        width_kind: "sd" (z = 1) or "90" (z = 1.645)
        labels: Optional true labels drawn as markers at 0 / 1
    """
    if kind not in BAND_COLORS:
        raise ValueError(f"unknown uncertainty kind {kind!r}")
    order = np.argsort(report.mean, kind="stable")
    mean = report.mean[order]
    half = report.band(kind, width_kind)[order]
    upper = np.clip(mean + half, 0.0, 1.0)
    lower = np.clip(mean - half, 0.0, 1.0)

    width, height = 640, 380
    x0, x1 = 70.0, float(width - 30)
    y0, y1 = float(height - 60), 50.0
    m = mean.shape[0]
    x_scale = LinearScale((0.0, max(m - 1, 1)), (x0, x1))
    y_scale = LinearScale((0.0, 1.0), (y0, y1))

    xs = [x_scale(i) for i in range(m)]
    line = " ".join(f"{fmt(x)},{fmt(y_scale(v))}" for x, v in zip(xs, mean))
    band = " ".join(
        [f"{fmt(x)},{fmt(y_scale(v))}" for x, v in zip(xs, upper)]
        + [f"{fmt(x)},{fmt(y_scale(v))}" for x, v in zip(reversed(xs), reversed(lower))]
    )
    markers = []
    if labels is not None:
        sorted_labels = np.asarray(labels)[order]
        markers = [{"x": x, "y": y_scale(float(label))} for x, label in zip(xs, sorted_labels)]

    x_ticks = [{"pos": x_scale(v), "label": fmt(v, 0)} for v in x_scale.ticks(6) if v <= m - 1]
    band_label = "1 sd" if width_kind == "sd" else "90% band"
    color = BAND_COLORS[kind]
    return render_svg("bayes/templates/uncertainty.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y0": y0,
        "y1": y1,
        "line": line,
        "band": band,
        "color": color,
        "markers": markers,
        "xticks": x_ticks,
        "yticks": axis_ticks(y_scale, 5, 1),
        "legend": [
            {"label": "Predictive mean", "color": "#111111"},
            {"label": f"{kind.capitalize()} ({band_label})", "color": color, "opacity": "0.3"},
        ],
    })
