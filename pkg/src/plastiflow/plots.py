"""Self-contained deterministic SVG line plots.

Hand-rolled rather than delegated to a plotting library so that a fixed
input yields byte-identical output: coordinates are formatted with fixed
precision and no timestamps or generated ids are embedded.  Tick labels
carry enough information to invert the data-to-pixel affine map, which the
round-trip tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeries

PAD_FRAC = 0.05


@dataclass
class PlotStyle:
    width: int = 640
    height: int = 440
    margin: int = 56
    log_y: bool = False
    title: str = ""
    x_label: str = "x"
    y_label: str = "y"


PALETTE = ("#1f6fb2", "#c23b22", "#3a8c3f", "#8a56a2", "#b8860b", "#2aadbe")


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * abs(step):
        ticks.append(0.0 if abs(v) < 1e-15 * abs(step) else v)
        v += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(lo_e, hi_e + 1)
            if lo / 1.0001 <= 10.0 ** e <= hi * 1.0001]


def render_curves(curves, style: PlotStyle | None = None) -> str:
    """Render labelled (x, y) polylines; curves = [(label, xs, ys), ...]."""
    style = style or PlotStyle()
    if not curves:
        raise EmptySeries("no curves to plot")
    xs_all = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in curves])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, _, y in curves])
    if xs_all.size == 0:
        raise EmptySeries("curves carry no points")
    if style.log_y and np.any(ys_all <= 0):
        raise ValueError("log scale requires positive values")

    def pad(lo, hi):
        if hi == lo:
            span = max(abs(hi), 1.0)
            return lo - PAD_FRAC * span, hi + PAD_FRAC * span
        span = hi - lo
        return lo - PAD_FRAC * span, hi + PAD_FRAC * span

    x_lo, x_hi = pad(float(xs_all.min()), float(xs_all.max()))
    if style.log_y:
        ly = np.log10(ys_all)
        y_lo, y_hi = pad(float(ly.min()), float(ly.max()))
    else:
        y_lo, y_hi = pad(float(ys_all.min()), float(ys_all.max()))

    w, hgt, mar = style.width, style.height, style.margin

    def px(x):
        return mar + (x - x_lo) / (x_hi - x_lo) * (w - 2 * mar)

    def py(y):
        yy = math.log10(y) if style.log_y else y
        return hgt - mar - (yy - y_lo) / (y_hi - y_lo) * (hgt - 2 * mar)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" '
        f'viewBox="0 0 {w} {hgt}">',
        f'<rect x="0" y="0" width="{w}" height="{hgt}" fill="white"/>',
        f'<rect x="{mar}" y="{mar}" width="{w - 2 * mar}" height="{hgt - 2 * mar}" '
        'fill="none" stroke="#222222" stroke-width="1"/>',
    ]
    if style.title:
        parts.append(f'<text x="{w / 2:.2f}" y="{mar / 2:.2f}" text-anchor="middle" '
                     f'font-size="14">{style.title}</text>')

    for tx in _nice_ticks(x_lo, x_hi):
        p = px(tx)
        parts.append(f'<line x1="{p:.2f}" y1="{hgt - mar:.2f}" x2="{p:.2f}" '
                     f'y2="{hgt - mar + 5:.2f}" stroke="#222222"/>')
        parts.append(f'<text x="{p:.2f}" y="{hgt - mar + 18:.2f}" text-anchor="middle" '
                     f'font-size="11" class="xtick" data-value="{tx:.12g}">{tx:.6g}</text>')
    y_ticks = _log_ticks(10 ** y_lo, 10 ** y_hi) if style.log_y else _nice_ticks(y_lo, y_hi)
    for ty in y_ticks:
        p = py(ty)
        parts.append(f'<line x1="{mar - 5:.2f}" y1="{p:.2f}" x2="{mar:.2f}" '
                     f'y2="{p:.2f}" stroke="#222222"/>')
        parts.append(f'<text x="{mar - 8:.2f}" y="{p + 4:.2f}" text-anchor="end" '
                     f'font-size="11" class="ytick" data-value="{ty:.12g}">{ty:.6g}</text>')
    parts.append(f'<text x="{w / 2:.2f}" y="{hgt - 8:.2f}" text-anchor="middle" '
                 f'font-size="12">{style.x_label}</text>')
    parts.append(f'<text x="14" y="{hgt / 2:.2f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 14 {hgt / 2:.2f})">{style.y_label}</text>')

    for idx, (label, cx, cy) in enumerate(curves):
        cx = np.asarray(cx, dtype=float)
        cy = np.asarray(cy, dtype=float)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(cx, cy))
        color = PALETTE[idx % len(PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'class="curve" data-label="{label}" points="{pts}"/>')
        parts.append(f'<text x="{w - mar + 4:.2f}" y="{mar + 14 * (idx + 1):.2f}" '
                     f'font-size="11" fill="{color}">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(curves, style: PlotStyle | None = None) -> str:
    """Alias kept close to the CLI verb; see :func:`render_curves`."""
    return render_curves(curves, style)
