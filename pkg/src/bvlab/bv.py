"""Discrete BV calculus on a :class:`~bvlab.grid.GridSpace`.

The total variation of a cell function ``u`` in a region is the weighted sum
of ``|u_c - u_c'|`` over face-adjacent pairs, with edges that leave the region
counted at half weight.  Perimeter is the total variation of an indicator.
Because every quantity is a finite sum over edges, the coarea formula holds
exactly (up to floating point summation order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import BoundaryContact, InvalidArgument, ResolutionInsufficient
from .grid import CellSet, GridSpace, ball

__all__ = [
    "GridFunction",
    "ApproxLimits",
    "MtSplit",
    "as_values",
    "indicator",
    "edge_region_factor",
    "total_variation",
    "perimeter",
    "coarea_check",
    "approx_limits",
    "mt_split",
    "ball_densities",
    "isoperimetric_check",
]

DEFAULT_DENSITY_TOL = 0.01


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Finite real values attached to the cells of a space."""

    space: GridSpace = field(repr=False)
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.space.n_cells:
            raise InvalidArgument(
                f"function has {v.size} values, space has {self.space.n_cells} cells"
            )
        if not np.isfinite(v).all():
            raise InvalidArgument("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def superlevel(self, t: float) -> CellSet:
        """The strict superlevel set ``{u > t}``."""
        return CellSet(self.space, self.values > t)

    def levels(self) -> np.ndarray:
        return np.unique(self.values)


@dataclass(frozen=True)
class ApproxLimits:
    lower: float
    upper: float
    radii_used: list[float]
    densities: list[dict]

    @property
    def jumps(self) -> bool:
        return self.lower < self.upper


@dataclass(frozen=True, eq=False)
class MtSplit:
    interior: CellSet
    boundary: CellSet
    exterior: CellSet


def as_values(space: GridSpace, u) -> np.ndarray:
    """Return the value array of ``u`` (GridFunction, CellSet or array)."""
    if isinstance(u, GridFunction):
        space.check_owns(u)
        return u.values
    if isinstance(u, CellSet):
        space.check_owns(u)
        return u.mask.astype(float)
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size != space.n_cells:
        raise InvalidArgument(
            f"function has {arr.size} values, space has {space.n_cells} cells"
        )
    return arr


def indicator(E: CellSet) -> GridFunction:
    return GridFunction(E.space, E.mask.astype(float))


def _region_mask(space: GridSpace, region: CellSet | None) -> np.ndarray | None:
    if region is None:
        return None
    space.check_owns(region)
    return region.mask


def edge_region_factor(space: GridSpace, region: CellSet | None) -> np.ndarray:
    """Per-edge factor: 1 inside ``region``, 1/2 across its boundary, 0 outside."""
    m = _region_mask(space, region)
    if m is None:
        return np.ones(space.edge_u.size)
    return 0.5 * (m[space.edge_u].astype(float) + m[space.edge_v].astype(float))


def total_variation(space: GridSpace, u, region: CellSet | None = None) -> float:
    """Weighted sum of neighbor jumps of ``u`` in ``region`` (whole grid if None)."""
    v = as_values(space, u)
    w = space.edge_weights * edge_region_factor(space, region)
    return float(np.dot(w, np.abs(v[space.edge_u] - v[space.edge_v])))


def perimeter(space: GridSpace, E: CellSet, region: CellSet | None = None) -> float:
    """Perimeter of ``E`` in ``region``: total variation of its indicator."""
    space.check_owns(E)
    m = E.mask
    cut = m[space.edge_u] != m[space.edge_v]
    w = space.edge_weights[cut]
    if region is not None:
        w = w * edge_region_factor(space, region)[cut]
    return float(w.sum())


def coarea_check(space: GridSpace, u, region: CellSet | None = None) -> tuple[float, float]:
    """Both sides of the discrete coarea formula.

    ``rhs`` sums ``(t_{k+1} - t_k) * P({u > t_k}, region)`` over the sorted
    distinct values of ``u``.  The per-level perimeters are assembled with a
    difference array over level ranks, so the cost is linear in edges plus
    levels.
    """
    v = as_values(space, u)
    lhs = total_variation(space, v, region)
    levels, rank = np.unique(v, return_inverse=True)
    if levels.size < 2:
        return lhs, 0.0
    w = space.edge_weights * edge_region_factor(space, region)
    ru, rv = rank[space.edge_u], rank[space.edge_v]
    lo, hi = np.minimum(ru, rv), np.maximum(ru, rv)
    keep = lo < hi
    # edge is cut by {u > t_k} exactly for lo <= k < hi
    diff = np.zeros(levels.size + 1)
    np.add.at(diff, lo[keep], w[keep])
    np.add.at(diff, hi[keep], -w[keep])
    per_level = np.cumsum(diff)[: levels.size - 1]
    rhs = math.fsum(np.diff(levels) * per_level)
    return lhs, float(rhs)


def _check_scales(space: GridSpace, r_min: float, density_tol: float) -> None:
    if r_min < 4 * space.spacing * (1 - 1e-12):
        raise ResolutionInsufficient(
            f"r_min = {r_min:g} is below 4h = {4 * space.spacing:g}"
        )
    if not 0 < density_tol < 0.5:
        raise InvalidArgument("density_tol must lie in (0, 1/2)")


def _limits_in_ball(vals: np.ndarray, mus: np.ndarray, tol: float) -> tuple[float, float, float, float]:
    """Approximate lower/upper limits of sampled values in one ball.

    Returns ``(lower, upper, density_below_lower, density_above_upper)``.
    """
    order = np.argsort(vals, kind="stable")
    vals, mus = vals[order], mus[order]
    total = mus.sum()
    levels, start = np.unique(vals, return_index=True)
    mass_below = np.concatenate([[0.0], np.cumsum(mus)])[start] / total  # mu(u < t_k)
    mass_upto = np.concatenate([np.cumsum(mus)[start[1:] - 1], [total]]) / total
    mass_above = 1.0 - mass_upto  # mu(u > t_k)
    ok_up = np.flatnonzero(mass_above <= tol)
    ok_lo = np.flatnonzero(mass_below <= tol)
    ku, kl = ok_up[0], ok_lo[-1]
    return float(levels[kl]), float(levels[ku]), float(mass_below[kl]), float(mass_above[ku])


def approx_limits(
    space: GridSpace,
    u,
    x,
    r_min: float | None = None,
    r_max: float | None = None,
    density_tol: float = DEFAULT_DENSITY_TOL,
) -> ApproxLimits:
    """Estimate the lower and upper approximate limits of ``u`` at ``x``.

    The estimate is taken at the single radius ``r_min``; the dyadic sweep from
    ``r_max`` down to ``r_min`` is recorded in ``densities`` for diagnostics.
    """
    v = as_values(space, u)
    h = space.spacing
    r_min = 4 * h if r_min is None else float(r_min)
    r_max = 4 * r_min if r_max is None else float(r_max)
    _check_scales(space, r_min, density_tol)
    if not r_max > r_min:
        raise InvalidArgument("need r_min < r_max")
    radii = []
    r = r_max
    while r > r_min * (1 + 1e-12):
        radii.append(r)
        r /= 2
    radii.append(r_min)
    dist = space.distances(x)
    diags = []
    lower = upper = float("nan")
    for r in radii:
        inside = dist < r
        if not inside.any():
            raise ResolutionInsufficient(f"ball of radius {r:g} contains no cell")
        lo, up, dlo, dup = _limits_in_ball(v[inside], space.cell_measures[inside], density_tol)
        diags.append(
            {"radius": r, "lower": lo, "upper": up, "density_below": dlo, "density_above": dup}
        )
        lower, upper = lo, up
    return ApproxLimits(lower=lower, upper=upper, radii_used=radii, densities=diags)


def _stencil(space: GridSpace, r: float) -> np.ndarray:
    """Boolean footprint of ``ball(c, r)`` around a cell center ``c``."""
    k = int(math.ceil(r / space.spacing))
    ax = np.arange(-k, k + 1) * space.spacing
    grids = np.meshgrid(*([ax] * space.dim), indexing="ij")
    d2 = sum(g**2 for g in grids)
    return np.sqrt(d2) < r


def ball_densities(space: GridSpace, E: CellSet, r: float) -> np.ndarray:
    """``mu(B(c, r) ∩ E) / mu(B(c, r))`` for every cell center ``c``.

    Balls are truncated by the outer boundary of the grid.
    """
    space.check_owns(E)
    foot = _stencil(space, r).astype(float)
    mu = space.reshape(space.cell_measures)
    inside = ndimage.correlate(mu * space.reshape(E.mask), foot, mode="constant", cval=0.0)
    total = ndimage.correlate(mu, foot, mode="constant", cval=0.0)
    return (inside / total).reshape(-1)


def mt_split(
    space: GridSpace,
    E: CellSet,
    x_set: CellSet | None = None,
    r_min: float | None = None,
    density_tol: float = DEFAULT_DENSITY_TOL,
) -> MtSplit:
    """Split queried cells into measure-theoretic interior, boundary and exterior of ``E``."""
    space.check_owns(E)
    x_mask = space.full().mask if x_set is None else x_set.mask
    if x_set is not None:
        space.check_owns(x_set)
    r_min = 4 * space.spacing if r_min is None else float(r_min)
    _check_scales(space, r_min, density_tol)
    dens = ball_densities(space, E, r_min)
    # float noise from the correlation must not hide exact zeros
    interior = x_mask & (1.0 - dens <= density_tol + 1e-12)
    exterior = x_mask & ~interior & (dens <= density_tol + 1e-12)
    boundary = x_mask & ~interior & ~exterior
    return MtSplit(CellSet(space, interior), CellSet(space, boundary), CellSet(space, exterior))


def isoperimetric_check(space: GridSpace, E: CellSet, x, r: float) -> float:
    """Ratio ``min(mu(B ∩ E), mu(B \\ E)) / (r * P(E, B))`` with ``B = ball(x, r)``.

    Returns ``inf`` when the perimeter vanishes but the numerator does not.
    """
    space.check_owns(E)
    if r < 8 * space.spacing * (1 - 1e-12):
        raise ResolutionInsufficient(f"r = {r:g} is below 8h")
    space.check_ball_inside(x, 2 * r)
    B = ball(space, x, r)
    inside = space.measure(B & E)
    outside = space.measure(B - E)
    num = min(inside, outside)
    if num == 0.0:
        return 0.0
    per = perimeter(space, E, B)
    if per == 0.0:
        return math.inf
    return num / (r * per)
