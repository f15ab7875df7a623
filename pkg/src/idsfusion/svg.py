"""Standalone SVG line and bar charts.

Every chart records its plot box and data domains as ``data-*`` attributes on
the root element, so point coordinates can be recomputed from the source table.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
BENIGN_COLOR = "#1f77b4"
MALICIOUS_COLOR = "#d62728"

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 50, 60


def _f(v: float) -> str:
    return f"{v:.3f}"


def plot_box():
    return LEFT, TOP, WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM


def y_domain(values) -> tuple[float, float]:
    """Lower bound rounded down to a tenth, clamped to [0, 0.9]; upper bound 1."""
    lo = min(values) if values else 0.0
    lo = min(math.floor(lo * 10.0) / 10.0, 0.9)
    return max(lo, 0.0), 1.0


def project(x, y, x_dom, y_dom):
    px, py, pw, ph = plot_box()
    x0, x1 = x_dom
    y0, y1 = y_dom
    sx = px + (x - x0) / (x1 - x0) * pw if x1 > x0 else px + pw / 2
    sy = py + ph - (y - y0) / (y1 - y0) * ph
    return sx, sy


def _header(title, attrs):
    extra = "".join(f' data-{k}="{v}"' for k, v in attrs.items())
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif"{extra}>',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]


def line_chart(title: str, series: dict, x_label: str = "", y_label: str = "") -> str:
    """``series`` maps a name to a list of ``(x, y)`` pairs (x ascending)."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_dom = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_dom = y_domain(ys)
    px, py, pw, ph = plot_box()
    out = _header(title, {
        "plot-box": " ".join(_f(v) for v in (px, py, pw, ph)),
        "x-domain": f"{x_dom[0]!r} {x_dom[1]!r}",
        "y-domain": f"{y_dom[0]!r} {y_dom[1]!r}",
    })
    out.append(f'<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for k in range(6):
        yv = y_dom[0] + (y_dom[1] - y_dom[0]) * k / 5
        _, sy = project(x_dom[0], yv, x_dom, y_dom)
        out.append(f'<line x1="{px}" y1="{_f(sy)}" x2="{px + pw}" y2="{_f(sy)}" stroke="#ddd"/>')
        out.append(f'<text x="{px - 6}" y="{_f(sy + 4)}" text-anchor="end" font-size="11">{yv:.2f}</text>')
    for xv in sorted(set(xs)):
        sx, _ = project(xv, y_dom[0], x_dom, y_dom)
        out.append(f'<text x="{_f(sx)}" y="{py + ph + 18}" text-anchor="middle" font-size="11">{xv:g}</text>')
    if x_label:
        out.append(f'<text x="{px + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text x="18" y="{py + ph / 2:.1f}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 18 {py + ph / 2:.1f})">{escape(y_label)}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = [project(x, y, x_dom, y_dom) for x, y in pts]
        path = " ".join(f"{_f(sx)},{_f(sy)}" for sx, sy in coords)
        out.append(f'<polyline data-series="{escape(name)}" points="{path}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>')
        for sx, sy in coords:
            out.append(f'<circle cx="{_f(sx)}" cy="{_f(sy)}" r="3" fill="{color}"/>')
        ly = py + 16 * i + 8
        out.append(f'<line x1="{px + pw + 12}" y1="{ly}" x2="{px + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{px + pw + 38}" y="{ly + 4}" font-size="12">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(title: str, groups: dict, y_label: str = "packets") -> str:
    """Paired benign/malicious bars; ``groups`` maps a label to ``(benign, malicious)``."""
    top = max([max(b, m) for b, m in groups.values()] + [1])
    px, py, pw, ph = plot_box()
    out = _header(title, {
        "plot-box": " ".join(_f(v) for v in (px, py, pw, ph)),
        "y-domain": f"0 {top}",
    })
    out.append(f'<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    slot = pw / max(len(groups), 1)
    bar = slot * 0.35
    for i, (label, counts) in enumerate(groups.items()):
        x0 = px + i * slot + slot * 0.15
        for j, (count, color, cls) in enumerate(zip(counts, (BENIGN_COLOR, MALICIOUS_COLOR), ("benign", "malicious"))):
            h = count / top * ph
            out.append(f'<rect data-group="{escape(label)}" data-class="{cls}" data-count="{count}" '
                       f'x="{_f(x0 + j * bar)}" y="{_f(py + ph - h)}" width="{_f(bar)}" height="{_f(h)}" fill="{color}"/>')
        out.append(f'<text x="{_f(x0 + bar)}" y="{py + ph + 18}" text-anchor="middle" font-size="11">{escape(label)}</text>')
    out.append(f'<text x="18" y="{py + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 18 {py + ph / 2:.1f})">{escape(y_label)}</text>')
    for j, (name, color) in enumerate((("benign", BENIGN_COLOR), ("malicious", MALICIOUS_COLOR))):
        ly = py + 16 * j + 8
        out.append(f'<rect x="{px + pw + 12}" y="{ly - 6}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{px + pw + 30}" y="{ly + 4}" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
