"""Minimal SVG 1.1 scatter and line charts (points, polylines, axes)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"]
W, H, PAD = 480, 400, 48


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi <= xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi <= ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x):
        return PAD + (x - self.xlo) / (self.xhi - self.xlo) * (W - 2 * PAD)

    def py(self, y):
        return H - PAD - (y - self.ylo) / (self.yhi - self.ylo) * (H - 2 * PAD)

    def axes(self, title, xlabel, ylabel, xticks=None, yticks=None):
        out = [
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#333"/>',
            f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        ]
        for v in xticks if xticks is not None else np.linspace(self.xlo, self.xhi, 5):
            x = self.px(v)
            out.append(f'<line x1="{x:.2f}" y1="{H - PAD}" x2="{x:.2f}" y2="{H - PAD + 4}" stroke="#333"/>')
            out.append(f'<text x="{x:.2f}" y="{H - PAD + 16}" text-anchor="middle" font-size="10">{v:g}</text>')
        for v in yticks if yticks is not None else np.linspace(self.ylo, self.yhi, 5):
            y = self.py(v)
            out.append(f'<line x1="{PAD - 4}" y1="{y:.2f}" x2="{PAD}" y2="{y:.2f}" stroke="#333"/>')
            out.append(f'<text x="{PAD - 6}" y="{y + 3:.2f}" text-anchor="end" font-size="10">{v:.3g}</text>')
        return out


def _doc(body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">\n<rect width="100%" height="100%" fill="white"/>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def scatter_svg(groups, title="") -> str:
    """``groups``: list of (label, points (n,2), colour or None, hollow?)."""
    pts = [np.asarray(p, dtype=np.float64).reshape(-1, 2) for _, p, _, _ in groups]
    allp = np.concatenate(pts) if pts else np.zeros((0, 2))
    if len(allp):
        (xlo, ylo), (xhi, yhi) = allp.min(0), allp.max(0)
    else:
        xlo = ylo = -1.0
        xhi = yhi = 1.0
    f = _Frame(xlo, xhi, ylo, yhi)
    body = f.axes(title, "x0", "x1")
    for k, ((label, _, colour, hollow), p) in enumerate(zip(groups, pts)):
        colour = colour or PALETTE[k % len(PALETTE)]
        style = f'fill="none" stroke="{colour}"' if hollow else f'fill="{colour}" fill-opacity="0.6"'
        body.append(f'<g {style}>')
        body.extend(f'<circle cx="{f.px(x):.2f}" cy="{f.py(y):.2f}" r="1.6"/>' for x, y in p)
        body.append("</g>")
        body.append(
            f'<text x="{W - PAD - 4}" y="{PAD + 14 + 14 * k}" text-anchor="end" font-size="11" '
            f'fill="{colour}">{escape(label)}</text>'
        )
    return _doc(body)


def line_svg(xs, ys, title="", xlabel="steps", ylabel="accuracy") -> str:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    # log-spaced step counts read better on a log axis
    lx = np.log10(xs) if len(xs) and xs.min() > 0 else xs
    f = _Frame(lx.min(), lx.max(), min(0.0, ys.min()), max(1.0, ys.max()))
    body = f.axes(title, xlabel, ylabel, xticks=[], yticks=np.linspace(f.ylo, f.yhi, 6))
    for v, lv in zip(xs, lx):
        body.append(f'<text x="{f.px(lv):.2f}" y="{H - PAD + 16}" text-anchor="middle" font-size="10">{v:g}</text>')
    pts = " ".join(f"{f.px(a):.2f},{f.py(b):.2f}" for a, b in zip(lx, ys))
    body.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    body.extend(f'<circle cx="{f.px(a):.2f}" cy="{f.py(b):.2f}" r="3" fill="{PALETTE[0]}"/>' for a, b in zip(lx, ys))
    return _doc(body)
