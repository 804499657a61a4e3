"""
SVG charts for the Models module: confusion heatmap and grouped accuracy bars
"""

from typing import Dict, List, Optional, Sequence

from uqtab.core.svg import PALETTE, LinearScale, axis_ticks, fmt
from uqtab.core.templates import render_svg
from uqtab.shared.models import ConfusionMatrix


def _cell_color(fraction: float) -> str:
    """White to deep blue"""
    low = (0xF7, 0xFB, 0xFF)
    high = (0x08, 0x30, 0x6B)
    rgb = [round(a + (b - a) * fraction) for a, b in zip(low, high)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_confusion(cm: ConfusionMatrix, title: str, subtitle: str = "") -> str:
    """2x2 heatmap; rows are actual classes, columns predicted classes"""
    size = 110.0
    x0, y0 = 120.0, 80.0
    layout = [
        ("TN", cm.tn, 0, 0),
        ("FP", cm.fp, 0, 1),
        ("FN", cm.fn, 1, 0),
        ("TP", cm.tp, 1, 1),
    ]
    peak = max(cm.tn, cm.fp, cm.fn, cm.tp, 1)
    cells = []
    for name, count, row, col in layout:
        fraction = count / peak
        cells.append({
            "name": name,
            "count": count,
            "x": x0 + col * size,
            "y": y0 + row * size,
            "color": _cell_color(fraction),
            "text_color": "#ffffff" if fraction > 0.5 else "#111111",
        })
    return render_svg("models/templates/confusion.svg.j2", {
        "title": title,
        "subtitle": subtitle,
        "width": 380,
        "height": 340,
        "size": size,
        "x0": x0,
        "y0": y0,
        "cells": cells,
        "column_labels": [
            {"text": "No recurrence", "pos": x0 + size / 2},
            {"text": "Recurrence", "pos": x0 + 1.5 * size},
        ],
        "row_labels": [
            {"text": "No", "pos": y0 + size / 2},
            {"text": "Yes", "pos": y0 + 1.5 * size},
        ],
    })


def render_accuracy_bars(
    groups: Sequence[str],
    series: Dict[str, Dict[str, Optional[float]]],
    title: str,
) -> str:
    """
    Grouped bars, one group per model and one bar per series
    Args:
        groups: Model names in display order
        series: series name (e.g. "Full features") -> model name -> accuracy
        title: Chart title
    """
    series_names = list(series.keys())
    width = max(520, 70 + 58 * len(groups))
    height = 380
    x0, x1 = 70.0, float(width - 20)
    y0, y1 = float(height - 90), 50.0
    y_scale = LinearScale((0.0, 1.0), (y0, y1))
    group_width = (x1 - x0) / max(len(groups), 1)
    bar_width = 0.8 * group_width / max(len(series_names), 1)

    bars: List[dict] = []
    group_labels = []
    for g, group in enumerate(groups):
        left = x0 + g * group_width + 0.1 * group_width
        group_labels.append({"name": group, "pos": left + 2})
        for s, name in enumerate(series_names):
            value = series[name].get(group)
            if value is None:
                continue
            top = y_scale(value)
            bars.append({
                "x": left + s * bar_width,
                "y": top,
                "width": bar_width * 0.92,
                "height": y0 - top,
                "color": PALETTE[s % len(PALETTE)],
                "label": fmt(value, 3),
                "title": f"{group} / {name}: {fmt(value, 4)}",
            })

    ticks = axis_ticks(y_scale, 5, 1)
    return render_svg("models/templates/accuracy_bars.svg.j2", {
        "title": title,
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y0": y0,
        "y1": y1,
        "bars": bars,
        "groups": group_labels,
        "yticks": ticks,
        "gridlines": ticks,
        "legend": [{"label": name, "color": PALETTE[s % len(PALETTE)]} for s, name in enumerate(series_names)],
    })
