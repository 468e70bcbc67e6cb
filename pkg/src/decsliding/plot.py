"""Self-contained SVG line charts of run-record columns (log-scale y)."""

from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

from .errors import ConfigurationError
from .metrics import CSV_COLUMNS, read_csv

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 160, 20, 45
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _series(path, x_column, y_column):
    record = read_csv(path)
    return list(zip(record.column(x_column).tolist(), record.column(y_column).tolist()))


def _loggable(pts):
    # log axis: drop points it cannot show
    return [(float(x), float(y)) for x, y in pts if math.isfinite(y) and y > 0]


def _ticks(lo, hi):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def svg_plot(series: dict, y_column: str, x_column: str = "k") -> str:
    """Render ``{label: [(x, y), ...]}`` as an SVG document string."""
    series = {label: _loggable(pts) for label, pts in series.items()}
    points = [p for pts in series.values() for p in pts]
    if points:
        x_lo = min(p[0] for p in points)
        x_hi = max(p[0] for p in points)
        ly = [math.log10(p[1]) for p in points]
        y_lo, y_hi = math.floor(min(ly)), math.ceil(max(ly))
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0, 1
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return MARGIN_TOP + (y_hi - math.log10(y)) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>',
    ]
    for e in _ticks(y_lo, y_hi):
        y = py(10.0**e)
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{MARGIN_LEFT + plot_w}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x_column)}</text>')
    out.append(f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + plot_h + 16}" text-anchor="end">{x_lo:g}</text>')
    out.append(f'<text x="{MARGIN_LEFT + plot_w}" y="{MARGIN_TOP + plot_h + 16}" text-anchor="end">{x_hi:g}</text>')
    out.append(
        f'<text transform="translate(14,{MARGIN_TOP + plot_h / 2:.1f}) rotate(-90)" text-anchor="middle">'
        f"{escape(y_column)}</text>"
    )
    for n, (label, pts) in enumerate(series.items()):
        color = PALETTE[n % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = MARGIN_TOP + 14 + 18 * n
        lx = WIDTH - MARGIN_RIGHT + 12
        out.append(f'<line class="legend" x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_plot(csv_paths, y_column: str, path, x_column: str = "k") -> None:
    """One polyline per CSV, labelled with the file's base name."""
    for col in (y_column, x_column):
        if col not in CSV_COLUMNS:
            raise ConfigurationError(f"unknown column {col!r}; expected one of {CSV_COLUMNS}")
    series = {}
    for p in csv_paths:
        label = base = os.path.splitext(os.path.basename(os.fspath(p)))[0]
        n = 1
        while label in series:
            n += 1
            label = f"{base} ({n})"
        series[label] = _series(p, x_column, y_column)
    text = svg_plot(series, y_column, x_column)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
