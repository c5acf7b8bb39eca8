"""Plain SVG forest plot of an analysis report.

The output is a pure function of the report, so identical reports give
byte-identical files. Each successful method gets a block: one row per
study (square at the effect, whiskers at the 95% CI) and a diamond for the
pooled estimate.
"""

from __future__ import annotations

import math
from html import escape

ROW_H = 18
LABEL_W = 170
PLOT_W = 360
VALUE_W = 170
MARGIN = 12


def _fmt(v) -> str:
    return f"{v:.2f}"


def _finite(*vals) -> bool:
    return all(v is not None and math.isfinite(v) for v in vals)


def _blocks(report):
    methods = report.get("methods") or []
    if not methods:
        raise ValueError("the report has no methods to plot")
    blocks = []
    for name in methods:
        res = report["results"].get(name, {})
        if res.get("status") != "ok":
            continue
        blocks.append((name, res.get("studies", []), res["pooled"]))
    if not blocks:
        raise ValueError("no method in the report produced a pooled estimate")
    return blocks


def _x_range(blocks):
    vals = [0.0]
    for _, studies, pooled in blocks:
        for s in studies:
            vals += [v for v in (s.get("effect"), s.get("ci_low"), s.get("ci_high"))
                     if _finite(v)]
        vals += [v for v in (pooled["estimate"], pooled["ci_low"], pooled["ci_high"])
                 if _finite(v)]
    lo, hi = min(vals), max(vals)
    pad = 0.05 * (hi - lo or 1.0)
    return lo - pad, hi + pad


def render_forest_svg(report: dict) -> str:
    """Return the SVG document for ``report`` (the dict produced by ``analyze``)."""
    blocks = _blocks(report)
    lo, hi = _x_range(blocks)
    x0 = MARGIN + LABEL_W

    def sx(v):
        return x0 + (v - lo) / (hi - lo) * PLOT_W

    rows = sum(len(st) + 2 for _, st, _ in blocks)
    height = MARGIN * 2 + ROW_H * (rows + 1)
    width = MARGIN * 2 + LABEL_W + PLOT_W + VALUE_W
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    y = MARGIN + ROW_H
    zx = sx(0.0)
    top = y - ROW_H // 2
    for name, studies, pooled in blocks:
        out.append(f'<text class="method" x="{MARGIN}" y="{y:.1f}" font-weight="bold">'
                   f'{escape(name)}</text>')
        y += ROW_H
        for s in studies:
            eff, cl, ch = s.get("effect"), s.get("ci_low"), s.get("ci_high")
            out.append(f'<g class="study"><text x="{MARGIN}" y="{y + 4:.1f}">'
                       f'{escape(str(s["study_id"]))}</text>')
            label = _fmt(eff)
            if _finite(cl, ch):
                out.append(f'<line x1="{sx(cl):.2f}" y1="{y:.1f}" x2="{sx(ch):.2f}" '
                           f'y2="{y:.1f}" stroke="black"/>')
                label += f" [{_fmt(cl)}, {_fmt(ch)}]"
            out.append(f'<rect x="{sx(eff) - 3:.2f}" y="{y - 3:.1f}" width="6" height="6" '
                       f'fill="black"/>')
            out.append(f'<text x="{x0 + PLOT_W + 8}" y="{y + 4:.1f}">{label}</text></g>')
            y += ROW_H
        est, cl, ch = pooled["estimate"], pooled["ci_low"], pooled["ci_high"]
        pts = [(sx(cl), y), (sx(est), y - 6), (sx(ch), y), (sx(est), y + 6)]
        path = " ".join(f"{a:.2f},{b:.1f}" for a, b in pts)
        out.append(f'<g class="pooled"><text x="{MARGIN}" y="{y + 4:.1f}">Pooled</text>'
                   f'<polygon class="diamond" points="{path}" fill="grey" stroke="black"/>'
                   f'<text x="{x0 + PLOT_W + 8}" y="{y + 4:.1f}">'
                   f'{_fmt(est)} [{_fmt(cl)}, {_fmt(ch)}]</text></g>')
        y += ROW_H
    out.append(f'<line x1="{zx:.2f}" y1="{top}" x2="{zx:.2f}" y2="{y - ROW_H // 2}" '
               f'stroke="grey" stroke-dasharray="3,3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_forest_svg(report: dict, out_path) -> None:
    text = render_forest_svg(report)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
