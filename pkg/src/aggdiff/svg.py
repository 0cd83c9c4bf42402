"""Minimal static SVG line charts, written directly as text.

CSV is the canonical output of every run; these plots are a convenience
for eyeballing probe and trace curves without any plotting toolchain.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 480
ML, MR, MT, MB = 70, 20, 40, 50  # margins


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out


def line_chart(
    xs,
    ys,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
) -> str:
    """One polyline with point markers; log axes take log10 of the data
    (caller guarantees positivity on a log axis)."""
    if len(xs) != len(ys) or not xs:
        raise ValueError("need equally many xs and ys, at least one point")
    fx = [math.log10(x) if logx else float(x) for x in xs]
    fy = [math.log10(y) if logy else float(y) for y in ys]
    xlo, xhi = min(fx), max(fx)
    ylo, yhi = min(fy), max(fy)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pw, ph = WIDTH - ML - MR, HEIGHT - MT - MB

    def px(v):
        return ML + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return MT + (yhi - v) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>')
    for t in _ticks(xlo, xhi):
        x = px(t)
        label = f"{t:g}" if not logx else f"1e{t:g}"
        parts.append(f'<line x1="{x:.1f}" y1="{MT + ph}" x2="{x:.1f}" y2="{MT + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{MT + ph + 20}" text-anchor="middle">{label}</text>')
    for t in _ticks(ylo, yhi):
        y = py(t)
        label = f"{t:g}" if not logy else f"1e{t:g}"
        parts.append(f'<line x1="{ML - 5}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ML - 8}" y="{y + 4:.1f}" text-anchor="end">{label}</text>')
    if xlabel:
        parts.append(f'<text x="{ML + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(
            f'<text x="18" y="{MT + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {MT + ph / 2})">{ylabel}</text>'
        )
    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(fx, fy))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>')
    for a, b in zip(fx, fy):
        parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="#1f5fa8"/>')
    parts.append("</svg>")
    return "\n".join(parts)
