"""
Stacked histogram of the numeric column by target level
"""

from uqtab.core.svg import PALETTE, LinearScale, axis_ticks
from uqtab.core.templates import render_svg
from uqtab.modules.data.services import StatsReport


def render_age_histogram(report: StatsReport) -> str:
    """Bins come from the report; one stacked segment per target level"""
    width, height = 560, 360
    x0, x1 = 60.0, float(width - 20)
    y0, y1 = float(height - 60), 50.0
    bins = report.histogram
    levels = list(report.target_counts.keys())

    lo = bins[0].lower if bins else 0.0
    hi = bins[-1].upper if bins else 1.0
    x_scale = LinearScale((lo, hi), (x0, x1))
    peak = max([sum(b.by_target.values()) for b in bins] + [1])
    y_scale = LinearScale((0.0, float(peak)), (y0, y1))

    bars = []
    for b in bins:
        base = 0
        for i, level in enumerate(levels):
            count = b.by_target.get(level, 0)
            if count == 0:
                continue
            top = y_scale(base + count)
            bars.append({
                "x": x_scale(b.lower),
                "y": top,
                "width": x_scale(b.upper) - x_scale(b.lower),
                "height": y_scale(base) - top,
                "color": PALETTE[i % len(PALETTE)],
                "title": f"{b.lower:g}-{b.upper:g}, {report.target}={level}: {count}",
            })
            base += count

    return render_svg("data/templates/age_histogram.svg.j2", {
        "title": f"{report.histogram_column or 'Value'} distribution by {report.target}",
        "column": report.histogram_column or "",
        "width": width,
        "height": height,
        "x0": x0,
        "x1": x1,
        "y0": y0,
        "y1": y1,
        "bars": bars,
        "xticks": axis_ticks(x_scale, 8, 0),
        "yticks": axis_ticks(y_scale, 5, 0),
        "legend": [
            {"label": f"{report.target}: {level}", "color": PALETTE[i % len(PALETTE)]}
            for i, level in enumerate(levels)
        ],
    })
