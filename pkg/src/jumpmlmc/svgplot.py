"""Hand-rolled SVG log-log convergence plots (no plotting dependency).

One figure with two panels: relative RMSE against the finest refinement
threshold and against mean estimator wall time, one series per method,
with order-1 and order-2 guide lines and fitted-slope annotations.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET

from .mlmc import StudySummary, fit_loglog_slope

__all__ = ["emit_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_PANEL_W = 360.0
_PANEL_H = 300.0
_MARGIN = 58.0
_GAP = 46.0


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


class _Panel:
    def __init__(self, svg, x0, y0, xs, ys, xlabel, ylabel, title):
        self.svg = svg
        self.x0, self.y0 = x0, y0
        pad = 0.15
        lx = [math.log10(v) for v in xs]
        ly = [math.log10(v) for v in ys]
        self.xmin, self.xmax = min(lx) - pad, max(lx) + pad
        self.ymin, self.ymax = min(ly) - pad, max(ly) + pad
        if self.xmax - self.xmin < 1e-9:
            self.xmin -= 0.5
            self.xmax += 0.5
        if self.ymax - self.ymin < 1e-9:
            self.ymin -= 0.5
            self.ymax += 0.5
        ET.SubElement(svg, "rect", x=str(x0), y=str(y0), width=str(_PANEL_W),
                      height=str(_PANEL_H), fill="white", stroke="black")
        for d in _decades(10.0**self.xmin, 10.0**self.xmax):
            if self.xmin <= d <= self.xmax:
                px = self.px(d)
                ET.SubElement(svg, "line", x1=str(px), y1=str(y0), x2=str(px),
                              y2=str(y0 + _PANEL_H), stroke="#dddddd")
                t = ET.SubElement(svg, "text", x=str(px), y=str(y0 + _PANEL_H + 16),
                                  fill="black", **{"font-size": "11", "text-anchor": "middle"})
                t.text = f"1e{d}"
        for d in _decades(10.0**self.ymin, 10.0**self.ymax):
            if self.ymin <= d <= self.ymax:
                py = self.py(d)
                ET.SubElement(svg, "line", x1=str(x0), y1=str(py), x2=str(x0 + _PANEL_W),
                              y2=str(py), stroke="#dddddd")
                t = ET.SubElement(svg, "text", x=str(x0 - 6), y=str(py + 4),
                                  fill="black", **{"font-size": "11", "text-anchor": "end"})
                t.text = f"1e{d}"
        tx = ET.SubElement(svg, "text", x=str(x0 + _PANEL_W / 2), y=str(y0 + _PANEL_H + 34),
                           fill="black", **{"font-size": "12", "text-anchor": "middle"})
        tx.text = xlabel
        ty = ET.SubElement(svg, "text", x=str(x0 - 44), y=str(y0 + _PANEL_H / 2), fill="black",
                           transform=f"rotate(-90 {x0 - 44} {y0 + _PANEL_H / 2})",
                           **{"font-size": "12", "text-anchor": "middle"})
        ty.text = ylabel
        tt = ET.SubElement(svg, "text", x=str(x0 + _PANEL_W / 2), y=str(y0 - 8),
                           fill="black", **{"font-size": "13", "text-anchor": "middle"})
        tt.text = title

    def px(self, lx: float) -> float:
        return self.x0 + (lx - self.xmin) / (self.xmax - self.xmin) * _PANEL_W

    def py(self, ly: float) -> float:
        return self.y0 + _PANEL_H - (ly - self.ymin) / (self.ymax - self.ymin) * _PANEL_H

    def series(self, xs, ys, color: str, label: str | None = None):
        pts = [(self.px(math.log10(x)), self.py(math.log10(y))) for x, y in zip(xs, ys)]
        if len(pts) > 1:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
            ET.SubElement(self.svg, "polyline", points=path, fill="none",
                          stroke=color, **{"stroke-width": "1.6"})
        for x, y in pts:
            ET.SubElement(self.svg, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="3.4",
                          fill=color, **{"class": "marker"})
        if label:
            t = ET.SubElement(self.svg, "text", x=f"{pts[-1][0] + 6:.2f}",
                              y=f"{pts[-1][1] - 6:.2f}", fill=color, **{"font-size": "11"})
            t.text = label

    def guide(self, xs, anchor_y: float, order: float, color="#999999"):
        """Dashed reference line of the given slope through the anchor."""
        x0, x1 = min(xs), max(xs)
        lx0, lx1 = math.log10(x0), math.log10(x1)
        ly0 = math.log10(anchor_y)
        ly1 = ly0 + order * (lx1 - lx0)
        ET.SubElement(self.svg, "line",
                      x1=f"{self.px(lx0):.2f}", y1=f"{self.py(ly0):.2f}",
                      x2=f"{self.px(lx1):.2f}", y2=f"{self.py(ly1):.2f}",
                      stroke=color, **{"stroke-dasharray": "5,4"})
        t = ET.SubElement(self.svg, "text", x=f"{self.px(lx1) + 4:.2f}",
                          y=f"{self.py(ly1) + 4:.2f}", fill=color, **{"font-size": "10"})
        t.text = f"order {order:g}"


def emit_plot(summary: list[StudySummary], path) -> None:
    """Write the two-panel log-log convergence figure for a study summary."""
    if not summary:
        raise ValueError("empty study summary")
    methods: dict[str, list[StudySummary]] = {}
    for row in summary:
        methods.setdefault(row.method, []).append(row)
    width = 2 * _PANEL_W + 2 * _MARGIN + _GAP
    height = _PANEL_H + 2 * _MARGIN + 24 * ((len(methods) + 1) // 2)
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    all_h = [r.h_L for rows in methods.values() for r in rows]
    all_rmse = [r.rmse_rel for rows in methods.values() for r in rows]
    all_time = [max(r.mean_time, 1e-9) for rows in methods.values() for r in rows]
    left = _Panel(svg, _MARGIN, _MARGIN, all_h, all_rmse,
                  "refinement h_L", "relative RMSE", "RMSE vs refinement")
    right = _Panel(svg, _MARGIN + _PANEL_W + _GAP, _MARGIN, all_time, all_rmse,
                   "mean wall time [s]", "relative RMSE", "RMSE vs wall time")
    if len(set(all_h)) > 1:
        anchor = min(all_rmse)
        left.guide(sorted(set(all_h)), anchor, 1.0)
        left.guide(sorted(set(all_h)), anchor * 0.7, 2.0)
    legend_y = _MARGIN + _PANEL_H + 48
    for idx, (method, rows) in enumerate(methods.items()):
        rows = sorted(rows, key=lambda r: -r.h_L)
        color = _COLORS[idx % len(_COLORS)]
        hs = [r.h_L for r in rows]
        rs = [r.rmse_rel for r in rows]
        ts = [max(r.mean_time, 1e-9) for r in rows]
        label = method
        if len(rows) >= 2:
            slope = fit_loglog_slope(hs, rs)
            label = f"{method} (slope {slope:.2f})"
        left.series(hs, rs, color)
        right.series(ts, rs, color)
        lx = _MARGIN + (idx % 2) * (_PANEL_W + _GAP)
        ly = legend_y + 20 * (idx // 2)
        ET.SubElement(svg, "circle", cx=str(lx), cy=str(ly - 4), r="4", fill=color)
        t = ET.SubElement(svg, "text", x=str(lx + 10), y=str(ly), fill="black",
                          **{"font-size": "12"})
        t.text = label
    tree = ET.ElementTree(svg)
    ET.indent(tree)
    tree.write(path, xml_declaration=True, encoding="unicode")
