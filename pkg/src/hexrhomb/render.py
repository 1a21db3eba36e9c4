"""SVG export of phase meshes and matplotlib report figures."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .meshio import Mesh

# well 1 white, well 2 gray, well 3 black
PALETTES = {
    "figure": {1: "#ffffff", 2: "#808080", 3: "#000000"},
    "color": {1: "#f4d35e", 2: "#0d3b66", 3: "#ee964b"},
}
HATCH = "url(#unresolved)"


@dataclass(frozen=True)
class RenderOptions:
    palette: str = "figure"
    stroke_width: float = 0.0  # in domain units; 0 draws no outlines
    max_cells: Optional[int] = None  # keep only the largest cells beyond this count
    zero_fill: Optional[str] = None  # solid fill for phase 0 instead of hatching
    width_px: int = 800


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def svg_document(mesh: Mesh, opts: RenderOptions = RenderOptions()) -> str:
    colors = PALETTES[opts.palette]
    xmin, ymin, xmax, ymax = mesh.bounding_box()
    w, h = max(xmax - xmin, 1e-300), max(ymax - ymin, 1e-300)
    X, phase = mesh.X, mesh.phase
    skipped = 0
    if opts.max_cells is not None and mesh.n_cells > opts.max_cells:
        a = 0.5 * np.abs((X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1])
                         - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0]))
        keep = np.sort(np.argsort(-a, kind="stable")[: opts.max_cells])
        skipped = mesh.n_cells - len(keep)
        X, phase = X[keep], phase[keep]
    hatch = w / 100
    height_px = max(1, round(opts.width_px * h / w))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{opts.width_px}" height="{height_px}" '
        f'viewBox="{_fmt(xmin)} {_fmt(ymin)} {_fmt(w)} {_fmt(h)}">',
        "<defs>",
        f'<pattern id="unresolved" patternUnits="userSpaceOnUse" width="{_fmt(hatch)}" '
        f'height="{_fmt(hatch)}" patternTransform="rotate(45)">',
        f'<rect width="{_fmt(hatch)}" height="{_fmt(hatch)}" fill="#ffffff"/>',
        f'<line x1="0" y1="0" x2="0" y2="{_fmt(hatch)}" stroke="#c0392b" '
        f'stroke-width="{_fmt(hatch / 3)}"/>',
        "</pattern>",
        "</defs>",
    ]
    if skipped:
        out.append(f"<!-- {skipped} smallest cells omitted -->")
    stroke = (f' stroke="#404040" stroke-width="{_fmt(opts.stroke_width)}"'
              if opts.stroke_width > 0 else "")
    # flip the second axis so the picture is not mirrored
    out.append(f'<g transform="matrix(1 0 0 -1 0 {_fmt(ymin + ymax)})"{stroke}>')
    for tri, p in zip(X.tolist(), phase.tolist()):
        fill = colors.get(p) or (opts.zero_fill if opts.zero_fill else HATCH)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in tri)
        out.append(f'<polygon points="{pts}" fill="{fill}" data-phase="{p}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(mesh: Mesh, path, opts: RenderOptions = RenderOptions()) -> None:
    Path(path).write_text(svg_document(mesh, opts), encoding="utf-8")


# ----------------------------------------------------------------------------
# matplotlib figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def metrics_figure(rows: Sequence, path, thetas: Sequence[float] = ()) -> None:
    """Decay of the indicator changes, growth of their BV and the unresolved area."""
    plt = _pyplot()
    j = [r.j for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4), constrained_layout=True)
    ax = axes[0]
    ax.semilogy(j[1:], [r.l1_total for r in rows[1:]], "o-", label="L1 change")
    ax.semilogy(j[1:], [r.bvd_total for r in rows[1:]], "s-", label="BV change")
    ax.set_xlabel("step")
    ax.legend(frameon=False)
    ax = axes[1]
    for t in thetas:
        ax.semilogy(j[1:], [r.interp_product(t) for r in rows[1:]], "o-", label=f"theta={t:.3g}")
    ax.set_xlabel("step")
    ax.set_title("interpolation product")
    if thetas:
        ax.legend(frameon=False)
    ax = axes[2]
    ax.plot(j, [r.unresolved_area for r in rows], "o-")
    ax.set_xlabel("step")
    ax.set_title("unresolved area")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def mesh_figure(mesh: Mesh, path, opts: RenderOptions = RenderOptions()) -> None:
    plt = _pyplot()
    from matplotlib.collections import PolyCollection

    colors = PALETTES[opts.palette]
    fc = [colors.get(p, opts.zero_fill or "#f2b8b0") for p in mesh.phase.tolist()]
    fig, ax = plt.subplots(figsize=(5, 5), constrained_layout=True)
    lw = 0.2 if opts.stroke_width > 0 else 0.0
    ax.add_collection(PolyCollection(mesh.X, facecolors=fc, edgecolors="#404040", linewidths=lw))
    xmin, ymin, xmax, ymax = mesh.bounding_box()
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def bv_figure(state, path) -> None:
    """Per-level BV increments of the nested triangle construction."""
    plt = _pyplot()
    inc = state.increments
    fig, ax = plt.subplots(figsize=(4, 3.2), constrained_layout=True)
    ax.semilogy(range(1, len(inc) + 1), inc, "o-")
    ax.set_xlabel("level")
    ax.set_ylabel("BV increment")
    fig.savefig(path, dpi=120)
    plt.close(fig)


__all__ = ["RenderOptions", "PALETTES", "svg_document", "write_svg", "metrics_figure",
           "mesh_figure", "bv_figure"]
