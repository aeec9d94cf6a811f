"""Deterministic SVG figures for reports.

The SVG text is assembled by hand with fixed number formatting, so the same
report always yields the same bytes.
"""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import EmptyData, UnsupportedKind
from .io import jsonable

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
KINDS = ("clt", "tail", "correlation")


def _f(x: float) -> str:
    return format(x, ".6g")


class _Canvas:
    def __init__(self, title: str, xr, yr, xlabel: str, ylabel: str):
        self.x0, self.x1 = xr
        self.y0, self.y1 = yr
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
        self.parts.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for k in range(5):
            fx = self.x0 + (self.x1 - self.x0) * k / 4
            fy = self.y0 + (self.y1 - self.y0) * k / 4
            px, py = self.px(fx), self.py(fy)
            self.parts.append(f'<text x="{_f(px)}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{_f(fx)}</text>')
            self.parts.append(f'<text x="{LEFT - 6}" y="{_f(py + 4)}" text-anchor="end">{_f(fy)}</text>')
        self.parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
        self.parts.append(f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
                          f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>')

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y):
        return HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def polyline(self, xs, ys, color, dash=None):
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>')

    def points(self, xs, ys, color):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" r="3" fill="{color}"/>')

    def rect(self, x0, x1, y, color):
        a, b = self.px(x0), self.px(x1)
        top, base = self.py(y), self.py(self.y0)
        self.parts.append(f'<rect x="{_f(a)}" y="{_f(top)}" width="{_f(b - a)}" '
                          f'height="{_f(base - top)}" fill="{color}" stroke="white" stroke-width="0.5"/>')

    def note(self, lines):
        for k, line in enumerate(lines):
            self.parts.append(f'<text x="{WIDTH - RIGHT - 8}" y="{TOP + 18 + 15 * k}" '
                              f'text-anchor="end">{escape(line)}</text>')

    def data(self, rows):
        body = "\n".join(" ".join(_f(v) for v in r) for r in rows)
        self.parts.append(f"<metadata>\n{body}\n</metadata>")

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _clt(r) -> str:
    edges, counts = r["histogram_edges"], r["histogram_counts"]
    total = sum(counts)
    if not counts or total == 0:
        raise EmptyData("CLT report has an empty histogram")
    dens = [c / (total * (b - a)) for c, a, b in zip(counts, edges, edges[1:])]
    var = r.get("limit_variance") or 1.0 / math.pi
    gx = [edges[0] + (edges[-1] - edges[0]) * k / 200 for k in range(201)]
    gy = [math.exp(-x * x / (2 * var)) / math.sqrt(2 * math.pi * var) for x in gx]
    ymax = 1.1 * max(max(dens), max(gy))
    c = _Canvas(f"kappa_n,x / b  (sigma={_f(r['sigma'])}, n={r['n']})", (edges[0], edges[-1]),
                (0.0, ymax), "kappa_n,x / b", "density")
    for d, a, b in zip(dens, edges, edges[1:]):
        c.rect(a, b, d, "#9ecae1")
    c.polyline(gx, gy, "#d62728")
    cov = r["covariance"]
    c.note([f"trials {r['trials']}", f"b = {_f(r['b_n_sigma'])}", f"var x = {_f(cov[0][0])}",
            f"limit var = {_f(var)}", f"KS x = {_f(r['ks'][0])}"])
    c.data([(a, b, d) for d, a, b in zip(dens, edges, edges[1:])])
    return c.svg()


def _tail(r) -> str:
    pts = [(h, p) for h, p in zip(r["H"], r["estimate"]) if p and p > 0]
    if not pts:
        raise EmptyData("tail report has no positive estimates")
    lx = [math.log10(h) for h, _ in pts]
    ly = [math.log10(p) for _, p in pts]
    pad = 0.2
    x0, x1 = min(lx) - pad, max(lx) + pad
    # reference line of slope -2 through the first point
    ref = [ly[0] - 2 * (x - lx[0]) for x in (x0, x1)]
    y0, y1 = min(ly + ref) - pad, max(ly + ref) + pad
    c = _Canvas(f"tail mu(|kappa| > H), sigma={_f(r['sigma'])}", (x0, x1), (y0, y1),
                "log10 H", "log10 tail")
    c.polyline([x0, x1], ref, "#7f7f7f", dash="5,4")
    c.points(lx, ly, "#1f77b4")
    c.note([f"fitted slope {_f(r['slope'])}", "reference slope -2", f"samples {r['samples']}"])
    c.data(pts)
    return c.svg()


def _correlation(r) -> str:
    pts = [(j, abs(v)) for j, v, s in zip(r["lags"], r["truncated"], r["truncated_se"])
           if j >= 1 and v is not None and s is not None and abs(v) > 0]
    if not pts:
        raise EmptyData("correlation report has no usable lags")
    ly = [math.log10(v) for _, v in pts]
    xs = [j for j, _ in pts]
    y0, y1 = min(ly) - 0.3, max(ly) + 0.3
    c = _Canvas(f"|E kappa' . kappa' o T^j|, sigma={_f(r['sigma'])}, H={_f(r['H'])}",
                (0.0, max(xs) + 1.0), (y0, y1), "lag j", "log10 |correlation|")
    c.points(xs, ly, "#2ca02c")
    slope = r.get("fit_slope")
    if slope is not None and r.get("fit_intercept") is not None:
        fx = [min(xs), max(xs)]
        c.polyline(fx, [(r["fit_intercept"] + slope * x) / math.log(10) for x in fx], "#d62728")
        c.note([f"log slope {_f(slope)}", f"95% CI [{_f(r['fit_slope_ci'][0])}, {_f(r['fit_slope_ci'][1])}]"])
    c.data(pts)
    return c.svg()


def render(report, kind: str) -> str:
    if kind not in KINDS:
        raise UnsupportedKind(f"no plot for kind {kind!r}; choose one of {', '.join(KINDS)}")
    r = jsonable(report)
    if not r:
        raise EmptyData("empty report")
    if r.get("kind") not in (None, kind):
        raise UnsupportedKind(f"report of kind {r.get('kind')!r} cannot be drawn as {kind!r}")
    return {"clt": _clt, "tail": _tail, "correlation": _correlation}[kind](r)


def emit_plot(report, kind: str, path) -> Path:
    """Render the report and write it; nothing is written if rendering fails."""
    svg = render(report, kind)
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path
