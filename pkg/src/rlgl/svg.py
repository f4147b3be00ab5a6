"""Minimal text SVG rendering for convergence and rate-region plots."""
import math
from xml.sax.saxutils import escape

import numpy as np

from .exceptions import EmptyInput

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=20, bottom=50)
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000", "#aec7e8",
)
CD_COLOR, PI_COLOR, INVALID_COLOR = "#4a78c2", "#e8e8e8", "#b03030"


def _fmt(v):
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates onto the plotting area."""

    def __init__(self, x0, x1, y0, y1):
        self.x0, self.x1 = x0, x1 if x1 > x0 else x0 + 1.0
        self.y0, self.y1 = y0, y1 if y1 > y0 else y0 + 1.0
        self.left, self.top = MARGIN["left"], MARGIN["top"]
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h


def _header():
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def _axes(f, xlabel, ylabel, xticks, yticks):
    out = [
        f'<rect class="frame" x="{f.left}" y="{f.top}" width="{f.w}" height="{f.h}" '
        'fill="none" stroke="black"/>'
    ]
    bottom = f.top + f.h
    for value, text in xticks:
        x = _fmt(f.px(value))
        out.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{bottom + 16}" text-anchor="middle">{escape(text)}</text>')
    for value, text in yticks:
        y = _fmt(f.py(value))
        out.append(f'<line x1="{f.left - 4}" y1="{y}" x2="{f.left}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{f.left - 6}" y="{y}" text-anchor="end" dy="4">{escape(text)}</text>')
    out.append(
        f'<text class="xlabel" x="{_fmt(f.left + f.w / 2)}" y="{HEIGHT - 12}" '
        f'text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text class="ylabel" x="16" y="{_fmt(f.top + f.h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_fmt(f.top + f.h / 2)})">{escape(ylabel)}</text>'
    )
    return out


def _linear_ticks(lo, hi, k=5):
    return [(lo + (hi - lo) * i / k, f"{lo + (hi - lo) * i / k:.3g}") for i in range(k + 1)]


def convergence_svg(series, title=None):
    """Log-scale residual against normalized cost.

    Parameters
    ----------
    series : sequence of (label, cost, l1)
        One polyline per entry, in order; ``l1`` values that are not
        positive are dropped from the log-scale plot.
    title : str, optional

    Returns
    -------
    str
    """
    series = [(str(lab), np.asarray(c, float), np.asarray(v, float)) for lab, c, v in series]
    series = [s for s in series if s[1].size]
    if not series:
        raise EmptyInput("nothing to plot")
    xmax = max(float(c.max()) for _, c, _ in series)
    pos = np.concatenate([v[v > 0] for _, _, v in series])
    if pos.size == 0:
        raise EmptyInput("no positive residual values to plot")
    ylo = math.floor(math.log10(pos.min()))
    yhi = math.ceil(math.log10(pos.max()))
    if yhi == ylo:
        yhi += 1
    f = _Frame(0.0, xmax, ylo, yhi)
    step = max(1, (yhi - ylo) // 8)
    yticks = [(e, f"1e{e}") for e in range(ylo, yhi + 1, step)]
    out = _header()
    if title:
        out.append(f'<text x="{_fmt(f.left + f.w / 2)}" y="14" text-anchor="middle">{escape(title)}</text>')
    out += _axes(f, "normalized cost", "l1 residual", _linear_ticks(0.0, xmax), yticks)
    for k, (label, cost, l1) in enumerate(series):
        keep = l1 > 0
        pts = " ".join(f"{_fmt(f.px(x))},{_fmt(f.py(math.log10(y)))}" for x, y in zip(cost[keep], l1[keep]))
        color = PALETTE[k % len(PALETTE)]
        out.append(
            f'<polyline class="series" data-label="{escape(label)}" data-max-cost="{float(cost.max())!r}" '
            f'fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
    out.append('<g class="legend">')
    lx = WIDTH - MARGIN["right"] + 12
    for k, (label, _, _) in enumerate(series):
        y = MARGIN["top"] + 12 + 16 * k
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 18}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend-label" x="{lx + 24}" y="{y + 4}">{escape(label)}</text>')
    out.append("</g>")
    out.append(f'<desc>x-max {xmax!r}</desc>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def region_svg(grid, title=None):
    """Heatmap of ``sign(r_CD - r_PI)`` with the analytic boundary overdrawn.

    Parameters
    ----------
    grid : RateRegionGrid
        Rows indexed by ``beta``, columns by ``lambda2``.
    """
    lam, beta, diff = grid.lambda2, grid.beta, grid.diff
    if lam.size == 0 or beta.size == 0:
        raise EmptyInput("empty grid")

    def edges(v):
        if v.size == 1:
            return np.array([v[0] - 0.5, v[0] + 0.5])
        mid = (v[1:] + v[:-1]) / 2
        return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])

    ex, ey = edges(lam), edges(beta)
    f = _Frame(ex[0], ex[-1], ey[0], ey[-1])
    out = _header()
    if title:
        out.append(f'<text x="{_fmt(f.left + f.w / 2)}" y="14" text-anchor="middle">{escape(title)}</text>')
    out.append('<g class="cells" shape-rendering="crispEdges">')
    for i in range(beta.size):
        y0, y1 = f.py(ey[i + 1]), f.py(ey[i])
        for j in range(lam.size):
            d = diff[i, j]
            if not np.isfinite(d):
                color, cls = INVALID_COLOR, "invalid"
            elif d > 0:
                color, cls = CD_COLOR, "cd"
            else:
                color, cls = PI_COLOR, "pi"
            x0, x1 = f.px(ex[j]), f.px(ex[j + 1])
            out.append(
                f'<rect class="{cls}" x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
                f'height="{_fmt(y1 - y0)}" fill="{color}"/>'
            )
    out.append("</g>")
    b = grid.boundary
    inside = (b >= ey[0]) & (b <= ey[-1])
    pts = " ".join(f"{_fmt(f.px(x))},{_fmt(f.py(y))}" for x, y in zip(lam[inside], b[inside]))
    out.append(f'<polyline class="boundary" fill="none" stroke="black" stroke-width="2" points="{pts}"/>')
    out += _axes(f, "lambda2", "beta", _linear_ticks(ex[0], ex[-1]), _linear_ticks(ey[0], ey[-1]))
    lx = WIDTH - MARGIN["right"] + 12
    for k, (color, text) in enumerate(
        [(CD_COLOR, f"{grid.n} CD steps win"), (PI_COLOR, "PI wins"), (INVALID_COLOR, "invalid")]
    ):
        y = MARGIN["top"] + 12 + 16 * k
        out.append(f'<rect x="{lx}" y="{y - 6}" width="12" height="12" fill="{color}" stroke="black"/>')
        out.append(f'<text class="legend-label" x="{lx + 18}" y="{y + 4}">{escape(text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
