"""Deterministic SVG rasters of cell sets and cell functions."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..bv import GridFunction
from ..grid import CellSet, GridSpace

__all__ = ["emit_svg", "PALETTE"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
CELL_PX = 4.0
MAX_PX = 1600.0


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") or "0"


def emit_svg(
    space: GridSpace,
    layers: Sequence[CellSet | GridFunction],
    path: str | Path,
    bbox: tuple[float, float, float, float] | None = None,
) -> Path:
    """Write one rectangle per member cell per layer, in layer order.

    Cell sets are drawn solid; functions are drawn where nonzero with opacity
    proportional to ``|u| / max |u|``.  ``bbox = (x0, x1, y0, y1)`` crops the
    picture to the cells whose centers fall inside it.
    """
    path = Path(path)
    h = space.spacing
    L = space.extent
    if bbox is None:
        bbox = (-L, L, -L, L) if space.dim == 2 else (-L, L, -h / 2, h / 2)
    x0, x1, y0, y1 = bbox
    nx = max(1, int(round((x1 - x0) / h)))
    ny = max(1, int(round((y1 - y0) / h)))
    px = min(CELL_PX, MAX_PX / max(nx, ny))
    width, height = nx * px, ny * px
    centers = space.centers
    cx = centers[:, 0]
    cy = centers[:, 1] if space.dim == 2 else np.zeros(space.n_cells)
    inside = (cx >= x0) & (cx <= x1) & (cy >= y0) & (cy <= y1)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" '
        'fill="white" stroke="black" stroke-width="1"/>',
    ]
    for k, layer in enumerate(layers):
        color = PALETTE[k % len(PALETTE)]
        if isinstance(layer, CellSet):
            values = layer.mask.astype(float)
        else:
            values = np.abs(layer.values)
        vmax = float(values[inside].max()) if inside.any() else 0.0
        out.append(f'<g fill="{color}">')
        for c in np.flatnonzero(inside & (values != 0)):
            left = (cx[c] - h / 2 - x0) / h * px
            top = (y1 - (cy[c] + h / 2)) / h * px
            attrs = (
                f'x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(px)}" height="{_fmt(px)}"'
            )
            if isinstance(layer, GridFunction) and vmax > 0:
                attrs += f' fill-opacity="{_fmt(values[c] / vmax)}"'
            out.append(f"<rect {attrs}/>")
        out.append("</g>")
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
