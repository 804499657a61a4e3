"""
Geometry helpers for the SVG charts
Charts compute coordinates here and hand plain numbers to the templates
"""

import math
from typing import List, Sequence, Tuple


def fmt(value: float, digits: int = 2) -> str:
    """Fixed-precision number text without a negative zero"""
    text = f"{float(value):.{digits}f}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


class LinearScale:
    """Maps a data interval onto a pixel interval"""

    def __init__(self, domain: Tuple[float, float], range_: Tuple[float, float]):
        lo, hi = float(domain[0]), float(domain[1])
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.domain = (lo, hi)
        self.range = (float(range_[0]), float(range_[1]))

    def __call__(self, value: float) -> float:
        lo, hi = self.domain
        r0, r1 = self.range
        return r0 + (float(value) - lo) / (hi - lo) * (r1 - r0)

    def ticks(self, count: int = 5) -> List[float]:
        return nice_ticks(self.domain[0], self.domain[1], count)


def nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    """Round tick values covering [lo, hi]"""
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    magnitude = 10 ** math.floor(math.log10(raw))
    step = magnitude
    for factor in (1, 2, 2.5, 5, 10):
        step = factor * magnitude
        if step >= raw:
            break
    start = math.ceil(lo / step) * step
    ticks = []
    value = start
    while value <= hi + 1e-9 * step:
        ticks.append(round(value, 10))
        value += step
    return ticks


def padded_extent(values: Sequence[float], pad: float = 0.05) -> Tuple[float, float]:
    """Min/max of values widened by a fraction of the span"""
    lo = min(values)
    hi = max(values)
    span = hi - lo if hi > lo else max(abs(hi), 1.0)
    return lo - pad * span, hi + pad * span


def blend_color(t: float) -> str:
    """
    Blue (low) to red (high) ramp used for feature-value coloring
    t is clipped to [0, 1]
    """
    t = min(max(float(t), 0.0), 1.0)
    low = (0x1E, 0x88, 0xE5)
    high = (0xFF, 0x0D, 0x57)
    rgb = [round(a + (b - a) * t) for a, b in zip(low, high)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


PALETTE = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52",
    "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
]


def axis_ticks(scale: LinearScale, count: int = 5, digits: int = 2) -> List[dict]:
    """Tick positions and labels for an axis drawn by the chart macros"""
    return [{"pos": scale(v), "label": fmt(v, digits)} for v in scale.ticks(count)]
