"""RD report files: curves.csv, a plain SVG with one polyline per curve, and
matplotlib PNG renderings of RD curves and ablation grids."""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .errors import InputError
from .metrics import write_curves_csv

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

_SVG_W, _SVG_H = 640, 420
_MARGIN = dict(left=70, right=160, top=30, bottom=50)


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def render_svg(curves, x_label="rate (kbps)", y_label="metric") -> str:
    rates = np.concatenate([c.rates for c in curves])
    metrics = np.concatenate([c.metrics for c in curves])
    x0, x1 = float(rates.min()), float(rates.max())
    y0, y1 = float(metrics.min()), float(metrics.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, top = _MARGIN["left"], _MARGIN["top"]
    pw = _SVG_W - left - _MARGIN["right"]
    ph = _SVG_H - top - _MARGIN["bottom"]

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
           f'viewBox="0 0 {_SVG_W} {_SVG_H}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for x in _nice_ticks(x0, x1):
        out.append(f'<text x="{sx(x):.1f}" y="{top + ph + 16}" text-anchor="middle">{x:.4g}</text>')
    for y in _nice_ticks(y0, y1):
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{_SVG_H - 12}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(y_label)}</text>')
    for i, curve in enumerate(curves):
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(p.rate):.2f},{sy(p.metric):.2f}" for p in curve.points)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{pts}">'
                   f'<title>{escape(curve.label)}</title></polyline>')
        ly = top + 14 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(curve.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_rd_png(curves, path, x_label="rate (kbps)", y_label="metric") -> None:
    fig = Figure(figsize=(6.4, 4.2), dpi=100)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    for i, curve in enumerate(curves):
        ax.plot(curve.rates, curve.metrics, marker="o", color=PALETTE[i % len(PALETTE)], label=curve.label)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)


def emit_rd_outputs(curves, out_dir, y_label=None, png: bool = True) -> list[str]:
    """Write curves.csv, curves.svg and (optionally) curves.png into ``out_dir``."""
    curves = list(curves)
    if not curves:
        raise InputError("emit_rd_outputs needs at least one curve")
    os.makedirs(out_dir, exist_ok=True)
    y_label = y_label or curves[0].metric_kind
    paths = [os.path.join(out_dir, "curves.csv"), os.path.join(out_dir, "curves.svg")]
    write_curves_csv(curves, paths[0])
    with open(paths[1], "w") as fh:
        fh.write(render_svg(curves, y_label=y_label))
    if png:
        paths.append(os.path.join(out_dir, "curves.png"))
        plot_rd_png(curves, paths[2], y_label=y_label)
    return paths


def plot_sweep_grid(rows, path, value_key="bd_rate_psnr", title="BD-rate (%) vs anchor") -> None:
    """Heat map of one sweep column over the (w_max, tau) grid; N/A cells stay blank."""
    w_values = sorted({r["w_max"] for r in rows})
    t_values = sorted({r["tau"] for r in rows})
    grid = np.full((len(w_values), len(t_values)), np.nan)
    for r in rows:
        v = r.get(value_key)
        if v is not None:
            grid[w_values.index(r["w_max"]), t_values.index(r["tau"])] = v
    fig = Figure(figsize=(1.4 * len(t_values) + 2.0, 1.0 * len(w_values) + 1.6), dpi=100)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    im = ax.imshow(grid, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(t_values)), [f"{t:g}" for t in t_values])
    ax.set_yticks(range(len(w_values)), [str(w) for w in w_values])
    ax.set_xlabel("tau")
    ax.set_ylabel("W_max")
    ax.set_title(title)
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            text = "N/A" if np.isnan(grid[i, j]) else f"{grid[i, j]:.2f}"
            ax.text(j, i, text, ha="center", va="center", color="white", fontsize=9)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path)
