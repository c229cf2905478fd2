"""Static SVG figures written by hand; no plotting backend needed.

Each figure is a string. Coordinates are mapped from data space into a
fixed plot box with a margin for the axis labels.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["branch_diagram", "profile_plot", "spacetime_plot", "stability_heatmap"]

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=30, bottom=55)
EVENT_LABELS = {"BranchPoint": "BP", "LimitPoint": "LP", "Hopf": "H", "unresolved": "?"}


class _Axes:
    def __init__(self, xlim, ylim, box=None):
        self.x0, self.x1 = _pad(xlim)
        self.y0, self.y1 = _pad(ylim)
        if box is None:
            box = (MARGIN["left"], MARGIN["top"], WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"])
        self.left, self.top, self.right, self.bottom = box

    def px(self, x):
        return self.left + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, xlabel, ylabel, ticks=5) -> list[str]:
        out = [
            f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
            f'height="{self.bottom - self.top}" fill="none" stroke="black"/>'
        ]
        for v in np.linspace(self.x0, self.x1, ticks):
            x = self.px(v)
            out.append(f'<line x1="{x:.2f}" y1="{self.bottom}" x2="{x:.2f}" y2="{self.bottom + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{self.bottom + 18}" font-size="11" text-anchor="middle">{v:.3g}</text>')
        for v in np.linspace(self.y0, self.y1, ticks):
            y = self.py(v)
            out.append(f'<line x1="{self.left - 5}" y1="{y:.2f}" x2="{self.left}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{self.left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{v:.3g}</text>')
        cx = 0.5 * (self.left + self.right)
        cy = 0.5 * (self.top + self.bottom)
        out.append(f'<text x="{cx:.1f}" y="{self.bottom + 40}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(
            f'<text x="{self.left - 52}" y="{cy:.1f}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 {self.left - 52} {cy:.1f})">{escape(ylabel)}</text>'
        )
        return out


def _pad(lim):
    lo, hi = float(lim[0]), float(lim[1])
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi <= lo:
        half = max(abs(lo) * 0.05, 0.5)
        return lo - half, hi + half
    return lo, hi


def _document(body: list[str], title: str = "") -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    parts = ['<?xml version="1.0" encoding="UTF-8"?>', head, '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="18" font-size="14" text-anchor="middle">{escape(title)}</text>')
    return "\n".join(parts + body + ["</svg>"]) + "\n"


def _runs(mask: np.ndarray):
    """Start and stop indices of runs of equal values."""
    edges = np.flatnonzero(np.diff(mask.astype(int))) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges, [mask.size]])
    return zip(starts, stops)


def branch_diagram(branches, events=(), xlabel="T", ylabel="a_6", title="") -> str:
    """Bifurcation diagram: solid where stable, dotted where unstable.

    ``branches`` is a list of ``(lam, a_probe, stable)`` arrays and
    ``events`` a list of ``(lam, a_probe, kind)``. Every branch point appears
    in exactly one polyline, so the polyline vertex total equals the number
    of rows in the branch tables.
    """
    lam_all = np.concatenate([np.asarray(b[0], float) for b in branches]) if branches else np.zeros(1)
    a_all = np.concatenate([np.asarray(b[1], float) for b in branches]) if branches else np.zeros(1)
    ax = _Axes((lam_all.min(), lam_all.max()), (a_all.min(), a_all.max()))
    body = ax.frame(xlabel, ylabel)
    for k, (lam, a, stable) in enumerate(branches):
        lam, a, stable = np.asarray(lam, float), np.asarray(a, float), np.asarray(stable, bool)
        for i0, i1 in _runs(stable):
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(ax.px(lam[i0:i1]), ax.py(a[i0:i1])))
            dash = "" if stable[i0] else ' stroke-dasharray="2,3"'
            body.append(
                f'<polyline class="branch" data-branch="{k}" data-stable="{int(stable[i0])}" points="{pts}" '
                f'fill="none" stroke="black" stroke-width="1.5"{dash}/>'
            )
    for lam, a, kind in events:
        x, y = float(ax.px(lam)), float(ax.py(a))
        body.append(f'<circle class="event" cx="{x:.2f}" cy="{y:.2f}" r="3.5" fill="black"/>')
        body.append(f'<text x="{x + 5:.2f}" y="{y - 5:.2f}" font-size="11">{EVENT_LABELS.get(kind, kind)}</text>')
    return _document(body, title)


def stability_heatmap(xs, ys, cells, xlabel, ylabel, boundary=(), title="") -> str:
    """Grid of cells, gray where stable, white where unstable, hatched red where invalid.

    ``boundary`` holds ``(x, y, kind)`` samples drawn as markers: squares
    for branch points, triangles for Hopf points.
    """
    xs, ys, cells = np.asarray(xs, float), np.asarray(ys, float), np.asarray(cells)
    dx = (xs[-1] - xs[0]) / (len(xs) - 1)
    dy = (ys[-1] - ys[0]) / (len(ys) - 1)
    ax = _Axes((xs[0] - dx / 2, xs[-1] + dx / 2), (ys[0] - dy / 2, ys[-1] + dy / 2))
    body = []
    w = abs(ax.px(dx) - ax.px(0))
    h = abs(ax.py(dy) - ax.py(0))
    fill = {1: "#b0b0b0", 0: "#ffffff", 9: "#e08080"}
    for j, yv in enumerate(ys):
        for i, xv in enumerate(xs):
            x = ax.px(xv) - w / 2
            y = ax.py(yv) - h / 2
            body.append(
                f'<rect class="cell" x="{x:.2f}" y="{y:.2f}" width="{w + 0.05:.2f}" height="{h + 0.05:.2f}" '
                f'fill="{fill.get(int(cells[j, i]), "#000000")}"/>'
            )
    for xv, yv, kind in boundary:
        x, y = float(ax.px(xv)), float(ax.py(yv))
        if kind == "Hopf":
            body.append(f'<polygon class="boundary" points="{x:.2f},{y - 3:.2f} {x - 3:.2f},{y + 3:.2f} {x + 3:.2f},{y + 3:.2f}" fill="blue"/>')
        else:
            body.append(f'<rect class="boundary" x="{x - 2.5:.2f}" y="{y - 2.5:.2f}" width="5" height="5" fill="darkred"/>')
    body += ax.frame(xlabel, ylabel)
    return _document(body, title)


def _shade(v: float) -> str:
    # white through blue to black, adequate for a monotone concentration scale
    v = min(max(v, 0.0), 1.0)
    if v < 0.5:
        t = v / 0.5
        r, g, b = 255 * (1 - t), 255 * (1 - 0.6 * t), 255
    else:
        t = (v - 0.5) / 0.5
        r, g, b = 0, 102 * (1 - t), 255 * (1 - t)
    return f"#{int(r):02x}{int(g):02x}{int(b):02x}"


def spacetime_plot(times, a, title="", max_rows=400) -> str:
    """Space-time heatmap of IAA (cells across, time upward) next to the final profile."""
    times, a = np.asarray(times, float), np.asarray(a, float)
    stride = max(1, int(np.ceil(len(times) / max_rows)))
    t_s, a_s = times[::stride], a[::stride]
    n = a.shape[1]
    lo, hi = float(a.min()), float(a.max())
    scale = (a_s - lo) / (hi - lo) if hi > lo else np.zeros_like(a_s)
    left_box = (MARGIN["left"], MARGIN["top"], 380, HEIGHT - MARGIN["bottom"])
    t_hi = t_s[-1] if t_s[-1] > t_s[0] else t_s[0] + 1.0
    ax = _Axes((0.5, n + 0.5), (t_s[0], t_hi), left_box)
    body = []
    cw = (ax.right - ax.left) / n
    rh = (ax.bottom - ax.top) / len(t_s)
    for k in range(len(t_s)):
        y = ax.bottom - (k + 1) * rh
        for i in range(n):
            body.append(
                f'<rect class="sample" data-row="{k * stride}" x="{ax.left + i * cw:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" '
                f'height="{rh + 0.05:.2f}" fill="{_shade(scale[k, i])}"/>'
            )
    body += ax.frame("cell", "t")
    prof = profile_plot(a[-1], box=(440, MARGIN["top"], WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]), raw=True)
    return _document(body + prof, title)


def profile_plot(a, title="", box=None, raw=False):
    """Line plot of an IAA profile over the cell index."""
    a = np.asarray(a, float)
    cells = np.arange(1, a.size + 1)
    ax = _Axes((1, a.size), (min(0.0, a.min()), a.max()), box)
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(ax.px(cells), ax.py(a)))
    body = ax.frame("cell", "a")
    body.append(f'<polyline class="profile" points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    return body if raw else _document(body, title)
