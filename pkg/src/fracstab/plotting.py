"""Dependency-free SVG line plots of trajectories."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(v: float) -> str:
    return format(v, ".4g")


def trajectory_svg(times, states, title: str = "", names=None) -> str:
    """One polyline per state component on shared axes."""
    t = np.asarray(times, dtype=float)
    x = np.asarray(states, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    finite = np.all(np.isfinite(x), axis=1)
    t, x = t[finite], x[finite]
    names = names or [f"x{i + 1}" for i in range(x.shape[1])]
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    tmin, tmax = (float(t.min()), float(t.max())) if t.size else (0.0, 1.0)
    vmin, vmax = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    if tmax == tmin:
        tmax = tmin + 1.0
    if vmax == vmin:
        vmin, vmax = vmin - 0.5, vmax + 0.5

    def sx(v):
        return x0 + (v - tmin) / (tmax - tmin) * (x1 - x0)

    def sy(v):
        return y0 + (v - vmin) / (vmax - vmin) * (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 20}" font-size="12" text-anchor="middle">{_fmt(tmin)}</text>',
        f'<text x="{x1}" y="{y0 + 20}" font-size="12" text-anchor="middle">{_fmt(tmax)}</text>',
        f'<text x="{(x0 + x1) / 2}" y="{y0 + 45}" font-size="14" text-anchor="middle">t</text>',
        f'<text x="{x0 - 8}" y="{y0}" font-size="12" text-anchor="end">{_fmt(vmin)}</text>',
        f'<text x="{x0 - 8}" y="{y1 + 4}" font-size="12" text-anchor="end">{_fmt(vmax)}</text>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" font-size="16" text-anchor="middle">{escape(title)}</text>')
    # thin long tracks so files stay small; endpoints always kept
    step = max(1, t.size // 2000)
    keep = np.unique(np.r_[np.arange(0, t.size, step), t.size - 1]) if t.size else np.array([], int)
    for i in range(x.shape[1]):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{sx(t[j]):.2f},{sy(x[j, i]):.2f}" for j in keep)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{x1 - 10}" y="{y1 + 16 * (i + 1)}" font-size="12" fill="{color}" '
                   f'text-anchor="end">{escape(names[i])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_trajectory_svg(traj, path: str | Path, title: str = "") -> None:
    Path(path).write_text(trajectory_svg(traj.times, traj.states, title), encoding="utf-8")
