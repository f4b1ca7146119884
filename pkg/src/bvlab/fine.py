"""Thinness profiles and capacity comparisons at small scales.

The thinness quotient of ``A`` at ``x`` and radius ``r`` is
``r * rcap(A ∩ B(x, r), B(x, 2r)) / mu(B(x, r))``.  A set is thin at ``x``
when the quotient tends to zero; on a grid only finitely many radii are
meaningful, so profiles carry a resolution floor and verdicts are heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bv import mt_split, perimeter
from .errors import InvalidArgument, PreconditionError, ResolutionInsufficient
from .grid import CellSet, GridSpace, ball
from .variational import variational_capacity

__all__ = [
    "ThinnessProfile",
    "ThinnessVerdict",
    "PointThicknessReport",
    "thinness_profile",
    "classify",
    "boxing_check",
    "density_point_capacity_check",
    "point_thickness_experiment",
    "capacity_shrink_profile",
    "origin_cells",
    "BOXING_SMALLNESS",
    "BOXING_CONSTANT",
    "DENSITY_POINT_CONSTANT",
]

TAU_THIN = 1e-2
TAU_THICK = 1e-2
BOXING_SMALLNESS = 1.0 / 8.0
BOXING_CONSTANT = 8.0
DENSITY_POINT_CONSTANT = 16.0


@dataclass(frozen=True)
class ThinnessProfile:
    """Thinness quotients ``theta_i`` at radii ``M**-i * R``, ``i = 0..depth``.

    Indices above ``resolution_floor`` use radii below ``8h`` and are untrusted.
    """

    center: tuple[float, ...]
    base_radius: float
    ratio_base: float
    depth: int
    radii: list[float]
    ratios: list[float]
    capacities: list[float]
    resolution_floor: int

    @property
    def trusted(self) -> list[float]:
        return self.ratios[: self.resolution_floor + 1]

    def is_strictly_decreasing(self) -> bool:
        t = self.trusted
        return len(t) >= 2 and all(b < a for a, b in zip(t, t[1:]))


@dataclass(frozen=True)
class ThinnessVerdict:
    classification: str
    slope: float
    threshold: tuple[float, float]
    last_trusted: float


def thinness_profile(
    space: GridSpace,
    A: CellSet,
    x,
    M: float = 2.0,
    R: float = 0.5,
    depth: int = 3,
    check_windows: bool = True,
) -> ThinnessProfile:
    """Thinness quotients of ``A`` at ``x`` over the radii ``M**-i * R``.

    With ``check_windows`` each capacity is also computed in the smaller window
    ``B(x, 1.5 r)`` and the window-monotone ordering of the two is enforced.
    """
    space.check_owns(A)
    if not M > 1:
        raise InvalidArgument("M must exceed 1")
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")
    if not R > 0:
        raise InvalidArgument("R must be positive")
    space.check_ball_inside(x, 2 * R)
    h = space.spacing
    radii = [R * M ** (-i) for i in range(depth + 1)]
    trusted = [i for i, r in enumerate(radii) if r >= 8 * h * (1 - 1e-12)]
    floor = trusted[-1] if trusted else -1
    ratios, caps = [], []
    for r in radii:
        Ai = A & ball(space, x, r)
        cap = variational_capacity(space, Ai, ball(space, x, 2 * r)).value
        if check_windows and Ai:
            cap_small = variational_capacity(space, Ai, ball(space, x, 1.5 * r)).value
            if cap > cap_small * (1 + 1e-12):
                raise AssertionError("capacity grew in a larger window")
        mu = space.measure(ball(space, x, r))
        if mu == 0:
            raise ResolutionInsufficient(f"ball of radius {r:g} contains no cell")
        caps.append(cap)
        ratios.append(r * cap / mu)
    center = tuple(float(c) for c in space._point(x))
    return ThinnessProfile(center, float(R), float(M), int(depth), radii, ratios, caps, floor)


def classify(
    profile: ThinnessProfile, tau_thin: float = TAU_THIN, tau_thick: float = TAU_THICK
) -> ThinnessVerdict:
    """Thin, thick or inconclusive, from the trusted part of a profile.

    Thin needs the last trusted ratio below ``tau_thin`` and a negative fitted
    slope of ``log(theta_i)`` against ``i``; thick needs every trusted ratio at
    least ``tau_thick``.
    """
    if not 0 < tau_thin <= tau_thick:
        raise InvalidArgument("need 0 < tau_thin <= tau_thick")
    t = np.asarray(profile.trusted, dtype=float)
    if t.size == 0:
        return ThinnessVerdict("inconclusive", math.nan, (tau_thin, tau_thick), math.nan)
    last = float(t[-1])
    pos = t > 0
    if not pos.any():
        slope = -math.inf
    elif not pos[-1]:
        slope = -math.inf  # reached an exact zero
    elif pos.sum() >= 2:
        idx = np.flatnonzero(pos)
        slope = float(np.polyfit(idx, np.log(t[pos]), 1)[0])
    else:
        slope = 0.0
    if (t >= tau_thick).all():
        label = "thick"
    elif last < tau_thin and slope < 0:
        label = "thin"
    else:
        label = "inconclusive"
    return ThinnessVerdict(label, slope, (tau_thin, tau_thick), last)


def boxing_check(space: GridSpace, E: CellSet, x, r: float) -> tuple[float, float]:
    """Compare the capacity of the essential part of ``E`` with its perimeter.

    Returns ``(cap_side, perim_side)`` where ``cap_side`` is the capacity of
    ``(interior ∪ boundary of E) ∩ B(x, r)`` in ``B(x, 2r)`` and ``perim_side``
    is ``P(E, B(x, 2r))``.  Requires ``E`` to be small in ``B(x, 2r)``.
    """
    space.check_owns(E)
    h = space.spacing
    if r < 16 * h * (1 - 1e-12):
        raise ResolutionInsufficient(f"r = {r:g} is below 16h")
    space.check_ball_inside(x, 2 * r)
    B2 = ball(space, x, 2 * r)
    density = space.measure(E & B2) / space.measure(B2)
    if density > BOXING_SMALLNESS:
        raise PreconditionError(
            f"density of E in B(x, 2r) is {density:.4g} > {BOXING_SMALLNESS:g}"
        )
    if not E & B2:
        return 0.0, 0.0
    B1 = ball(space, x, r)
    split = mt_split(space, E, B1, 4 * h)
    core = (split.interior | split.boundary) & B1
    cap = variational_capacity(space, core, B2).value
    return cap, perimeter(space, E, B2)


def density_point_capacity_check(
    space: GridSpace, A: CellSet, x, r: float
) -> tuple[float, float, float]:
    """Capacity lower bound at a density point of ``A``.

    Scans dyadic ``s = r, r/2, ...`` down to ``8h`` for the largest
    ``mu(B(x, s)) / s`` and returns ``(witness_s, lower_bound, cap)`` with
    ``lower_bound = mu(B(x, s)) / (16 s)`` and
    ``cap = rcap(A ∩ B(x, r), B(x, 2r))``.
    """
    space.check_owns(A)
    h = space.spacing
    if r < 8 * h * (1 - 1e-12):
        raise ResolutionInsufficient(f"r = {r:g} is below 8h")
    space.check_ball_inside(x, 2 * r)
    cell = space.cell_at(x)
    split = mt_split(space, A, space.cells([cell]), 4 * h)
    if cell not in split.interior:
        raise PreconditionError("x is not a density point of A at scale 4h")
    best_s, best_q = r, -math.inf
    s = r
    while s >= 8 * h * (1 - 1e-12):
        q = space.measure(ball(space, x, s)) / s
        if q > best_q:
            best_s, best_q = s, q
        s /= 2
    lower = best_q / DENSITY_POINT_CONSTANT
    cap = variational_capacity(space, A & ball(space, x, r), ball(space, x, 2 * r)).value
    return best_s, lower, cap


def origin_cells(space: GridSpace) -> CellSet:
    """The ``2**dim`` cells that have a corner at the origin."""
    mid = space.resolution // 2
    corner = np.indices((2,) * space.dim).reshape(space.dim, -1).T + (mid - 1)
    return space.cells(np.ravel_multi_index(tuple(corner.T), space.shape))


@dataclass(frozen=True)
class PointThicknessReport:
    radii: list[float]
    scaled_inverse_measure: list[float]
    successive_ratios: list[float]
    oracle_ratio: float
    decreasing: bool
    profile: ThinnessProfile = field(repr=False)
    profile_min: float


def point_thickness_experiment(
    space: GridSpace,
    depth: int = 4,
    r0: float = 0.5,
    profile_radius: float | None = None,
) -> PointThicknessReport:
    """Evidence that the origin carries positive 1-capacity under ``|x|^a``.

    Reports ``r / mu(B(0, r))`` over ``depth`` dyadic radii starting at ``r0``
    together with its continuum ratio per halving (``mu(B(0, r))`` is
    ``2 pi r**(2+a) / (2+a)`` in the continuum), and the
    thinness profile of the origin cells.  A uniform space serves as the
    contrast case (``a = 0``).
    """
    if space.dim != 2:
        raise InvalidArgument("the experiment runs on 2D spaces")
    spec = space.weight_spec
    if spec.kind == "power_law":
        if not -2 < spec.a < -1:
            raise InvalidArgument("power-law exponent must lie in (-2, -1)")
        a = spec.a
    elif spec.kind == "uniform":
        a = 0.0
    else:
        raise InvalidArgument(f"unsupported weight {spec}")
    origin = np.zeros(2)
    radii = [r0 * 2.0**-k for k in range(depth)]
    h = space.spacing
    if radii[-1] < 8 * h * (1 - 1e-12):
        raise ResolutionInsufficient(f"radius {radii[-1]:g} is below 8h")
    space.check_ball_inside(origin, radii[0])
    vals = [r / space.measure(ball(space, origin, r)) for r in radii]
    succ = [b / a_ for a_, b in zip(vals, vals[1:])]
    continuum = [r / (2 * math.pi * r ** (2 + a) / (2 + a)) for r in radii[:2]]
    oracle = continuum[1] / continuum[0]
    decreasing = all(b < a_ for a_, b in zip(vals, vals[1:]))
    R = radii[0] / 2 if profile_radius is None else profile_radius
    n_levels = max(1, int(math.floor(math.log2(R / (8 * h)) + 1e-9)))
    prof = thinness_profile(space, origin_cells(space), origin, 2.0, R, n_levels)
    return PointThicknessReport(
        radii,
        vals,
        succ,
        oracle,
        decreasing,
        prof,
        float(min(prof.trusted)),
    )


def capacity_shrink_profile(
    space: GridSpace, A: CellSet, x, R0: float, radii: Sequence[float]
) -> list[float]:
    """``rcap(A ∩ B(x, r), B(x, R0))`` for each radius in a decreasing list."""
    space.check_owns(A)
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise InvalidArgument("radii must be strictly decreasing")
    if radii and radii[-1] < 8 * space.spacing * (1 - 1e-12):
        raise InvalidArgument("radii must be at least 8h")
    if radii and radii[0] > R0:
        raise InvalidArgument("radii must not exceed R0")
    space.check_ball_inside(x, R0)
    window = ball(space, x, R0)
    return [
        variational_capacity(space, A & ball(space, x, r), window).value for r in radii
    ]
