"""Obstacle problems, 1-capacity and checks on their solutions.

In this discrete model the least-perimeter superset of an obstacle inside a
window is a minimum cut, and the variational 1-capacity is the same cut value.
General obstacles are handled level by level: each quantization threshold is a
set problem, constrained to contain the solution of the next higher level, and
the level sets are stacked into a function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .bv import (
    GridFunction,
    _stencil,
    as_values,
    ball_densities,
    perimeter,
    total_variation,
)
from .errors import Infeasible, InvalidArgument, ResolutionInsufficient
from .flow import CutProblem, min_cut
from .grid import CellSet, GridSpace, ball, estimate_constants

__all__ = [
    "ObstacleSpec",
    "SetSolution",
    "CapacityResult",
    "SuperminimizerReport",
    "SemicontinuityReport",
    "solve_obstacle_set",
    "solve_obstacle_general",
    "variational_capacity",
    "capacity_ball_comparison",
    "verify_superminimizer",
    "degiorgi_check",
    "degiorgi_slack",
    "weak_harnack_check",
    "semicontinuity_probe",
]

SUPERMIN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ObstacleSpec:
    """Data of the problem ``u >= psi`` in ``domain``, ``u = f`` outside it."""

    domain: CellSet
    obstacle: GridFunction | CellSet
    boundary_data: GridFunction | None = None
    levels: Sequence[float] = (1.0,)

    @property
    def space(self) -> GridSpace:
        return self.domain.space


@dataclass(frozen=True, eq=False)
class SetSolution:
    set: CellSet
    perimeter_value: float
    spec: ObstacleSpec | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class CapacityResult:
    value: float
    extremal_set: CellSet
    inner: CellSet
    window: CellSet


def _check_window(space: GridSpace, A: CellSet, omega: CellSet) -> None:
    space.check_owns(A)
    space.check_owns(omega)
    if not A <= omega:
        raise InvalidArgument("the obstacle set must lie inside the window")
    space.check_interior(omega, "window")


def solve_obstacle_set(space: GridSpace, A: CellSet, omega: CellSet) -> SetSolution:
    """Minimal least-perimeter set ``E`` with ``A ⊆ E ⊆ omega``."""
    _check_window(space, A, omega)
    res = min_cut(CutProblem(A, ~omega, omega - A))
    spec = ObstacleSpec(omega, A, None, (1.0,))
    return SetSolution(res.set, perimeter(space, res.set), spec)


def variational_capacity(space: GridSpace, A: CellSet, omega: CellSet) -> CapacityResult:
    """Discrete 1-capacity of ``A`` relative to the window ``omega``."""
    _check_window(space, A, omega)
    if not A:
        return CapacityResult(0.0, space.empty(), A, omega)
    res = min_cut(CutProblem(A, ~omega, omega - A))
    return CapacityResult(res.value, res.set, A, omega)


def solve_obstacle_general(space: GridSpace, spec: ObstacleSpec) -> GridFunction:
    """Solve a quantized obstacle problem by stacking nested set solutions.

    The result takes values in ``spec.levels``; it equals the boundary data
    outside the domain and lies above the obstacle inside it.
    """
    omega = spec.domain
    space.check_owns(omega)
    space.check_interior(omega, "domain")
    levels = np.asarray(spec.levels, dtype=float)
    if levels.ndim != 1 or levels.size == 0 or not np.isfinite(levels).all():
        raise InvalidArgument("levels must be a nonempty finite list")
    if np.any(np.diff(levels) <= 0):
        raise InvalidArgument("levels must be strictly increasing")

    if isinstance(spec.obstacle, CellSet):
        space.check_owns(spec.obstacle)
        if not spec.obstacle <= omega:
            raise InvalidArgument("the obstacle set must lie inside the domain")
        psi = spec.obstacle.mask.astype(float)
    else:
        psi = as_values(space, spec.obstacle)
    if spec.boundary_data is None:
        f = np.zeros(space.n_cells)
    else:
        f = as_values(space, spec.boundary_data)

    outside = ~omega.mask
    if not np.isin(f[outside], levels).all():
        raise InvalidArgument("boundary data outside the domain must take values in levels")
    if (psi[omega.mask] > levels[-1]).any():
        raise Infeasible("the obstacle exceeds the top level inside the domain")

    u = np.full(space.n_cells, levels[0])
    upper = np.zeros(space.n_cells, dtype=bool)
    for k in range(levels.size - 1, 0, -1):
        t = levels[k]
        src = (omega.mask & (psi >= t)) | (outside & (f >= t)) | upper
        snk = outside & (f < t)
        if (src & snk).any():
            raise Infeasible(f"no admissible set at level {t:g}")
        if src.any():
            res = min_cut(CutProblem(CellSet(space, src), CellSet(space, snk)))
            E = res.set.mask
        else:
            E = src
        u += (levels[k] - levels[k - 1]) * E
        upper = E
    return GridFunction(space, u)


def capacity_ball_comparison(
    space: GridSpace, A: CellSet, x, r: float, s: float, t: float
) -> tuple[float, float, float]:
    """Capacities of ``A`` in the windows ``B(x, t r)`` and ``B(x, s r)``.

    Returns ``(cap_t, cap_s, cap_s / cap_t)``; a larger window never has a
    larger capacity, and this is checked.
    """
    if not 1 < s < t:
        raise InvalidArgument("need 1 < s < t")
    if not r > 0:
        raise InvalidArgument("r must be positive")
    if not A <= ball(space, x, r):
        raise InvalidArgument("A must lie inside ball(x, r)")
    space.check_ball_inside(x, t * r)
    cap_t = variational_capacity(space, A, ball(space, x, t * r)).value
    cap_s = variational_capacity(space, A, ball(space, x, s * r)).value
    if cap_t > cap_s * (1 + 1e-12):
        raise AssertionError(f"window monotonicity broken: {cap_t} > {cap_s}")
    ratio = cap_s / cap_t if cap_t > 0 else (1.0 if cap_s == 0 else math.inf)
    return cap_t, cap_s, ratio


# --------------------------------------------------------------------------
# superminimizer verification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SuperminimizerReport:
    trials: int
    violations: list[tuple[int, float, float]]
    max_excess: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _random_perturbation(space: GridSpace, u: np.ndarray, omega: np.ndarray, rng) -> np.ndarray:
    """One nonnegative perturbation supported in ``omega``.

    Three families alternate: a scaled indicator of a random sub-rectangle, a
    random nonnegative piecewise-constant field on a coarse block partition,
    and a single-cell bump whose height matches one of the cell's jumps.
    """
    shape = space.shape
    cells = np.flatnonzero(omega)
    phi = np.zeros(space.n_cells)
    kind = rng.integers(3)
    jumps = np.abs(np.diff(np.unique(u)))
    scale = float(jumps.max()) if jumps.size else 1.0
    if kind == 0:
        idx = space.multi_index[cells]
        lo, hi = idx.min(axis=0), idx.max(axis=0)
        a = rng.integers(lo, hi + 1)
        b = rng.integers(lo, hi + 1)
        start, stop = np.minimum(a, b), np.maximum(a, b)
        box = np.all((space.multi_index >= start) & (space.multi_index <= stop), axis=1)
        phi[box] = rng.uniform(0.05, 2.0) * scale
    elif kind == 1:
        block = int(rng.integers(1, max(2, shape[0] // 8) + 1))
        coarse_shape = tuple(-(-n // block) for n in shape)
        coarse = rng.uniform(0, 1, size=coarse_shape) * scale
        coarse[rng.uniform(size=coarse_shape) < 0.5] = 0.0
        fine = coarse
        for ax in range(space.dim):
            fine = np.repeat(fine, block, axis=ax)
        fine = fine[tuple(slice(0, n) for n in shape)]
        phi = fine.reshape(-1).copy()
    else:
        c = int(rng.choice(cells))
        nb = space.neighbor_table[c]
        nb = nb[nb >= 0]
        diffs = u[nb] - u[c]
        pos = diffs[diffs > 0]
        phi[c] = float(rng.choice(pos)) if pos.size else rng.uniform(0.05, 1.0) * scale
    phi[~omega] = 0.0
    return phi


def verify_superminimizer(
    space: GridSpace,
    u,
    omega: CellSet,
    trials: int = 200,
    rng_seed: int = 0,
) -> SuperminimizerReport:
    """Test ``TV(u; S) <= TV(u + phi; S)`` for random nonnegative ``phi``.

    ``S`` is the support of ``phi`` together with its face neighbors.
    """
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    space.check_owns(omega)
    v = as_values(space, u)
    rng = np.random.default_rng(rng_seed)
    violations = []
    max_excess = -math.inf
    for trial in range(trials):
        phi = _random_perturbation(space, v, omega.mask, rng)
        if not (phi > 0).any():
            continue
        support = CellSet(space, phi > 0).dilate(1)
        before = total_variation(space, v, support)
        after = total_variation(space, v + phi, support)
        excess = before - after
        max_excess = max(max_excess, excess)
        if excess > SUPERMIN_TOL:
            violations.append((trial, before, after))
    return SuperminimizerReport(trials, violations, max_excess)


# --------------------------------------------------------------------------
# De Giorgi and weak Harnack
# --------------------------------------------------------------------------


def degiorgi_slack(space: GridSpace, s1: float, s2: float) -> float:
    """Multiplicative slack ``1 + 4h/(s2 - s1)`` for the discrete cutoff."""
    return 1.0 + 4.0 * space.spacing / (s2 - s1)


def degiorgi_check(
    space: GridSpace,
    u,
    x,
    k: float,
    s1: float,
    s2: float,
    domain: CellSet | None = None,
) -> tuple[float, float]:
    """Both sides of the Caccioppoli-type estimate for ``(u - k)_+``.

    ``lhs = TV((u-k)_+; B(x, s1))`` and
    ``rhs = 2/(s2 - s1) * sum over B(x, s2) of (u-k)_+ mu``.
    """
    if not 0 < s1 < s2:
        raise InvalidArgument("need 0 < s1 < s2")
    if s2 - s1 < 2 * space.spacing * (1 - 1e-12):
        raise InvalidArgument("need s2 - s1 >= 2h")
    B2 = ball(space, x, s2)
    if domain is not None and not B2 <= domain:
        raise InvalidArgument("ball(x, s2) must lie inside the domain")
    w = np.maximum(as_values(space, u) - k, 0.0)
    lhs = total_variation(space, w, ball(space, x, s1))
    rhs = 2.0 / (s2 - s1) * float(np.dot(w[B2.mask], space.cell_measures[B2.mask]))
    return lhs, rhs


def weak_harnack_check(
    space: GridSpace,
    u,
    x,
    r: float,
    R: float,
    k: float,
    Q: float | None = None,
) -> tuple[float, float, float]:
    """Return ``(sup_val, integral_term, fitted_C)`` for the sup bound of ``u``.

    ``integral_term = (R/(R-r))**Q * mean over B(x,R) of (u-k)_+`` and
    ``fitted_C = (sup_val - k) / integral_term`` (0 when the term vanishes).
    """
    if not 0 < r < R:
        raise InvalidArgument("need 0 < r < R")
    space.check_ball_inside(x, R)
    if Q is None:
        Q = estimate_constants(space).dimension_exponent
    v = as_values(space, u)
    Br = ball(space, x, r)
    BR = ball(space, x, R)
    if not Br:
        raise ResolutionInsufficient("ball(x, r) contains no cell")
    sup_val = float(v[Br.mask].max())
    mu = space.cell_measures[BR.mask]
    mean = float(np.dot(np.maximum(v[BR.mask] - k, 0.0), mu) / mu.sum())
    integral_term = (R / (R - r)) ** Q * mean
    fitted = (sup_val - k) / integral_term if integral_term > 0 else 0.0
    return sup_val, integral_term, fitted


# --------------------------------------------------------------------------
# semicontinuity probe
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SemicontinuityReport:
    """Per-cell gaps ``u^(x) - min of u over B(x, r)`` for each probe radius.

    ``lower`` holds the lower approximate limit at the smallest radius; cells
    outside ``probed`` carry NaN.  ``flagged`` marks probed cells whose gap at
    the smallest radius exceeds ``gap_tol``.
    """

    radii: list[float]
    lower: np.ndarray
    gaps: np.ndarray
    probed: CellSet
    flagged: CellSet
    gap_tol: float

    @property
    def n_flags(self) -> int:
        return len(self.flagged)


def _lower_limits_all(space: GridSpace, v: np.ndarray, r: float, tol: float) -> np.ndarray:
    """Lower approximate limit of ``v`` at every cell center, at radius ``r``."""
    levels = np.unique(v)
    out = np.full(space.n_cells, levels[0])
    for t in levels[1:]:
        dens_below = ball_densities(space, CellSet(space, v < t), r)
        out = np.where(dens_below <= tol + 1e-12, t, out)
    return out


def semicontinuity_probe(
    space: GridSpace,
    u,
    omega: CellSet,
    r_schedule: Sequence[float],
    density_tol: float = 0.01,
    gap_tol: float = 1e-9,
) -> SemicontinuityReport:
    """Compare the lower approximate limit with the plain infimum nearby.

    A function that is lower semicontinuous in the measure sense cannot have a
    lower approximate limit that sits strictly above the values of ``u`` on a
    set of non-negligible density; at finite scale this shows up as a gap
    between the tolerance-based limit and the plain minimum of ``u`` over the
    same ball.  Only cells whose largest probe ball lies inside ``omega`` are
    examined.  The probe reports; it asserts nothing.
    """
    space.check_owns(omega)
    radii = [float(r) for r in r_schedule]
    if not radii or any(b >= a for a, b in zip(radii, radii[1:])):
        raise InvalidArgument("r_schedule must be nonempty and strictly decreasing")
    if radii[-1] < 4 * space.spacing * (1 - 1e-12):
        raise ResolutionInsufficient("probe radii must be at least 4h")
    v = as_values(space, u)
    levels = np.unique(v)
    if levels.size > 64:
        raise InvalidArgument("the probe supports functions with at most 64 distinct values")

    foot_big = _stencil(space, radii[0])
    outside = space.reshape(~omega.mask)
    touches = ndimage.binary_dilation(outside, structure=foot_big)
    probed = omega.mask & ~touches.reshape(-1)

    lower = _lower_limits_all(space, v, radii[-1], density_tol)
    grid_v = space.reshape(v)
    gaps = np.full((len(radii), space.n_cells), np.nan)
    for i, r in enumerate(radii):
        m = ndimage.minimum_filter(grid_v, footprint=_stencil(space, r), mode="nearest")
        gaps[i, probed] = (lower - m.reshape(-1))[probed]
    low = np.where(probed, lower, np.nan)
    flagged = probed & (gaps[-1] > gap_tol)
    return SemicontinuityReport(
        radii, low, gaps, CellSet(space, probed), CellSet(space, flagged), gap_tol
    )
