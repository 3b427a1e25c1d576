"""Static SVG figures written as plain text (deterministic bytes)."""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import DomainError

W, H, PAD = 480, 360, 48


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _frame(title, xlabel, ylabel, xlim, ylim):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD // 2}" width="{W - PAD - PAD // 2}" height="{H - PAD - PAD // 2}" '
        'fill="none" stroke="black"/>',
        f'<text x="{W // 2}" y="16" text-anchor="middle" font-size="12">{title}</text>',
        f'<text x="{W // 2}" y="{H - 8}" text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="12" y="{H // 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 12 {H // 2})">{ylabel}</text>',
    ]
    for v, x in ((xlim[0], PAD), (xlim[1], W - PAD // 2)):
        out.append(f'<text x="{x}" y="{H - PAD + 14}" text-anchor="middle" font-size="9">{v:.3g}</text>')
    for v, y in ((ylim[0], H - PAD), (ylim[1], PAD // 2)):
        out.append(f'<text x="{PAD - 4}" y="{y}" text-anchor="end" font-size="9">{v:.3g}</text>')
    return out


def msd_spaghetti_svg(curves, title: str = "MSD") -> str:
    """Log-log MSD curves, one polyline per path."""
    curves = list(curves)
    if not curves:
        raise DomainError("no MSD curves to plot")
    pairs = [c.loglog_pairs() for c in curves]
    allp = np.vstack(pairs)
    allp = allp[np.all(np.isfinite(allp), axis=1)]
    if allp.size == 0:
        raise DomainError("no finite points to plot")
    (x0, y0), (x1, y1) = allp.min(axis=0), allp.max(axis=0)
    sx = _scale(x0, x1, PAD, W - PAD // 2)
    sy = _scale(y0, y1, H - PAD, PAD // 2)
    out = _frame(title, "log lag", "log MSD", (x0, x1), (y0, y1))
    for p in pairs:
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in p if math.isfinite(a) and math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="steelblue" stroke-opacity="0.5" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram_svg(counts, edges, mean: float, sd: float, title: str = "histogram") -> str:
    """Density histogram with the fitted Gaussian density overlaid."""
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if counts.size == 0 or counts.sum() == 0:
        raise DomainError("empty histogram")
    widths = np.diff(edges)
    widths[widths <= 0] = 1.0
    dens = counts / (counts.sum() * widths)
    xs = np.linspace(edges[0], edges[-1], 200)
    g = np.exp(-0.5 * ((xs - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)) if sd > 0 else 0 * xs
    ymax = float(max(dens.max(), g.max()))
    sx = _scale(edges[0], edges[-1], PAD, W - PAD // 2)
    sy = _scale(0.0, ymax, H - PAD, PAD // 2)
    out = _frame(title, "value", "density", (edges[0], edges[-1]), (0.0, ymax))
    for a, b, d in zip(edges[:-1], edges[1:], dens):
        x, y = sx(a), sy(d)
        out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(max(sx(b) - x, 0.0))}" '
                   f'height="{_fmt(sy(0.0) - y)}" fill="lightgray" stroke="gray"/>')
    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, g))
    out.append(f'<polyline fill="none" stroke="crimson" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(out_dir, curves=None, histogram=None, title: str = "") -> list:
    """Write ``msd.svg`` and/or ``hist.svg``; returns the written paths.

    ``histogram`` is any object with ``counts``, ``edges``, ``gauss_mean`` and
    ``gauss_sd`` attributes.
    """
    if curves is None and histogram is None:
        raise DomainError("nothing to plot")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if curves is not None:
        written.append((os.path.join(out_dir, "msd.svg"), msd_spaghetti_svg(curves, title or "MSD")))
    if histogram is not None:
        h = histogram
        written.append((os.path.join(out_dir, "hist.svg"),
                        histogram_svg(h.counts, h.edges, h.gauss_mean, h.gauss_sd, title or "histogram")))
    for path, text in written:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return [p for p, _ in written]
