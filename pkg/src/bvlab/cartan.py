"""Executable Cartan-type constructions at a thin point.

The weak construction splits a ball around ``x`` into dyadic annuli, groups
them by parity, and solves one perimeter obstacle problem per parity class.
Every claim about the two solution sets is turned into a recorded check.
The strong construction stacks capacity extremal sets over shrinking radii in
a space where points carry positive capacity.  The chain-of-rectangles
reproduction shows that fine upper semicontinuity can fail for solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bv import GridFunction, approx_limits, ball_densities, perimeter
from .errors import InvalidArgument, PreconditionError, ResolutionInsufficient
from .fine import ThinnessProfile, ThinnessVerdict, classify, thinness_profile
from .flow import CutProblem, min_cut
from .grid import CellSet, GridSpace, ball, build_grid, closed_ball
from .variational import solve_obstacle_set, variational_capacity

__all__ = [
    "Check",
    "Decomposition",
    "CartanCertificate",
    "StrongCartanResult",
    "CounterexampleReport",
    "annuli_decomposition",
    "weak_cartan_construct",
    "smallness_in_annuli_check",
    "strong_cartan_construct",
    "counterexample_set",
    "counterexample_run",
    "cusp_set",
    "SMALLNESS_CONSTANT",
]

SMALLNESS_CONSTANT = 32.0
VANISHING_TOL = 1e-2


@dataclass(frozen=True)
class Check:
    """One named, scale-tagged verification result."""

    name: str
    scale: float
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    trusted: bool = True

    @property
    def status(self) -> str:
        if not self.trusted:
            return "untrusted"
        return "pass" if self.passed else "fail"


@dataclass(frozen=True, eq=False)
class Decomposition:
    center: tuple[float, ...]
    radius: float
    depth: int
    radii: list[float]
    balls: list[CellSet] = field(repr=False)
    annuli: list[CellSet] = field(repr=False)
    stripes: list[CellSet] = field(repr=False)
    D0: CellSet = field(repr=False)
    D1: CellSet = field(repr=False)
    checks: list[Check] = field(default_factory=list)

    def parity_set(self, parity: int) -> CellSet:
        return self.D0 if parity == 0 else self.D1


def _stripe(space: GridSpace, x, r_lo: float, r_hi: float) -> CellSet:
    d = space.distances(x)
    return CellSet(space, (d >= r_lo) & (d < r_hi))


def annuli_decomposition(space: GridSpace, x, R: float, depth: int) -> Decomposition:
    """Dyadic balls ``B_i``, annuli ``H_i``, stripes ``F_i`` and parity unions.

    ``B_i = B(x, 2**-i R)``, ``H_i = B_i`` minus the closed ball of radius
    ``0.9 * 2**-(i+1) R``, ``F_i`` the cells with ``0.625 r_i <= d < 0.8 r_i``,
    ``D_0`` the union of even annuli and ``D_1`` of odd ones, ``i = 0..depth``.
    """
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")
    if not R > 0:
        raise InvalidArgument("R must be positive")
    space.check_ball_inside(x, 1.5 * R)
    h = space.spacing
    if 2.0**-depth * R < 16 * h * (1 - 1e-12):
        raise ResolutionInsufficient(
            f"2^-{depth} R = {2.0**-depth * R:g} is below 16h = {16 * h:g}"
        )
    radii = [R * 2.0**-i for i in range(depth + 2)]
    balls = [ball(space, x, r) for r in radii]
    annuli = [balls[i] - closed_ball(space, x, 0.9 * radii[i + 1]) for i in range(depth + 1)]
    stripes = [_stripe(space, x, 0.625 * radii[i], 0.8 * radii[i]) for i in range(depth + 1)]
    D0, D1 = space.empty(), space.empty()
    for i, H in enumerate(annuli):
        if i % 2 == 0:
            D0 = D0 | H
        else:
            D1 = D1 | H

    checks = []
    d = space.distances(x)
    must = balls[0].mask & (d > 0.9 * radii[depth + 1])
    missing = int((must & ~(D0.mask | D1.mask)).sum())
    checks.append(Check("parity_coverage", R, missing, 0, 0, missing == 0))
    for i in range(depth):
        F = stripes[i + 1]
        hits = len(F & annuli[i])
        if i + 2 <= depth:
            hits += len(F & annuli[i + 2])
        checks.append(Check("stripe_gap", radii[i + 1], hits, 0, 0, hits == 0))
    center = tuple(float(c) for c in space._point(x))
    return Decomposition(center, float(R), depth, radii, balls, annuli, stripes, D0, D1, checks)


@dataclass(frozen=True, eq=False)
class CartanCertificate:
    decomposition: Decomposition = field(repr=False)
    E0: CellSet = field(repr=False)
    E1: CellSet = field(repr=False)
    W: CellSet = field(repr=False)
    verdict: ThinnessVerdict | None
    overridden: bool
    superlevel_profile: ThinnessProfile | None
    perimeter_profiles: dict[str, list[float]]
    checks: list[Check]
    smallness_value: float = math.nan
    smallness_held: bool = False

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.trusted)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.trusted and not c.passed]

    def by_name(self, prefix: str) -> list[Check]:
        return [c for c in self.checks if c.name.startswith(prefix)]


def _strictly_decreasing(values) -> bool:
    return len(values) >= 2 and all(b < a for a, b in zip(values, values[1:]))


def weak_cartan_construct(
    space: GridSpace,
    A: CellSet,
    x,
    R: float,
    depth: int,
    verdict: ThinnessVerdict | None = None,
    override: bool = False,
) -> CartanCertificate:
    """Build the two parity solutions around a thin point and certify them.

    ``E_0`` solves the obstacle problem for ``W ∩ D_0 ∩ B_0`` in ``1.5 B_0`` and
    ``E_1`` the one for ``W ∩ D_1 ∩ B_1`` in ``1.5 B_1``, where ``W`` is ``A``
    dilated by one cell.  Without a verdict the thinness of ``A`` is measured
    at base radius ``R/2`` (so that every window stays inside ``1.5 B_0``);
    a verdict other than thin is rejected unless ``override`` is set.
    """
    space.check_owns(A)
    dec = annuli_decomposition(space, x, R, depth)
    xcell = space.cell_at(x)
    if xcell in A:
        raise PreconditionError("x lies in A")
    if verdict is None and A:
        verdict = classify(thinness_profile(space, A, x, 2.0, R / 2, depth))
    if A and verdict is not None and verdict.classification != "thin" and not override:
        raise PreconditionError(
            f"A is classified {verdict.classification} at x; pass override=True to proceed"
        )

    radii = dec.radii
    W = A.dilate(1)
    sols = []
    for parity in (0, 1):
        obstacle = W & dec.parity_set(parity) & dec.balls[parity]
        window = ball(space, x, 1.5 * radii[parity])
        sols.append(solve_obstacle_set(space, obstacle, window).set)
    E0, E1 = sols
    checks = list(dec.checks)
    d = space.distances(x)

    # (1) separation: exact cell counts
    for i in range(depth):
        E = sols[i % 2]
        count = len(E & dec.stripes[i + 1])
        checks.append(Check(f"separation_E{i % 2}", radii[i + 1], count, 0, 0, count == 0))

    # (2) coverage on A at resolved scales
    region = A.mask & dec.balls[0].mask & (d > 0.9 * radii[depth + 1])
    uncovered = int((region & ~(E0.mask | E1.mask)).sum())
    checks.append(Check("coverage", R, uncovered, 0, 0, uncovered == 0))

    # truncation consistency against independent per-scale solves
    for i in range(depth + 1):
        E = sols[i % 2]
        trunc = E & ball(space, x, 1.25 * radii[i])
        lhs = perimeter(space, trunc)
        obstacle = W & dec.parity_set(i % 2) & dec.balls[i]
        window = ball(space, x, 1.5 * radii[i])
        rhs = variational_capacity(space, obstacle, window).value
        ok = abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))
        checks.append(Check(f"truncation_E{i % 2}", radii[i], lhs, rhs, 1e-12, ok))

    # (3) vanishing density at the smallest resolved radius
    r_small = radii[depth]
    B_small = ball(space, x, r_small)
    mu_small = space.measure(B_small)
    for k, E in enumerate(sols):
        dens = space.measure(E & B_small) / mu_small
        checks.append(
            Check(f"vanishing_E{k}", r_small, dens, VANISHING_TOL, VANISHING_TOL,
                  dens < VANISHING_TOL)
        )

    # (4) perimeter thinness profiles
    per_profiles = {}
    for k, E in enumerate(sols):
        vals = []
        for r in radii[: depth + 1]:
            B = ball(space, x, r)
            vals.append(r * perimeter(space, E, B) / space.measure(B))
        per_profiles[f"E{k}"] = vals
        dec_ok = _strictly_decreasing(vals)
        checks.append(
            Check(f"perimeter_thinness_E{k}", radii[depth], vals[-1], vals[0], 0.0, dec_ok)
        )

    # (5) thinness of the union of the superlevel sets
    U = E0 | E1
    prof = thinness_profile(space, U, x, 2.0, R / 2, depth)
    t = prof.trusted
    checks.append(
        Check("superlevel_thinness", prof.radii[len(t) - 1], t[-1], t[0], 0.0,
              _strictly_decreasing(t))
    )
    # smallness at the top scale is recorded, not asserted: R is a parameter
    top = variational_capacity(space, W & dec.balls[0], ball(space, x, 1.5 * R)).value
    small = R * top / space.measure(dec.balls[0])
    held = small <= 1.0 / (2.0 * SMALLNESS_CONSTANT)
    return CartanCertificate(
        dec, E0, E1, W, verdict, bool(override), prof, per_profiles, checks, small, held
    )


def smallness_in_annuli_check(
    space: GridSpace, A: CellSet, x, R: float, C4: float = SMALLNESS_CONSTANT
) -> tuple[float, float]:
    """Density of the solution in the stripe ``5R/16 <= d < 2R/5``.

    Solves the obstacle problem for ``A`` in ``B(x, 3R/2)`` and returns
    ``(density_max, bound)``: the largest density of the solution in balls of
    radius ``4h`` centered in the stripe, and ``C4 * R * rcap(A, B(x, 2R)) /
    mu(B(x, R))``.
    """
    space.check_owns(A)
    if not R > 0:
        raise InvalidArgument("R must be positive")
    if not A <= ball(space, x, R):
        raise PreconditionError("A must lie inside B(x, R)")
    d = space.distances(x)
    gap = A.mask & (d > R / 4) & (d < 9 * R / 20)
    if gap.any():
        raise PreconditionError(
            f"A meets the annulus R/4 < d < 9R/20 in {int(gap.sum())} cells"
        )
    if not A:
        return 0.0, 0.0
    space.check_ball_inside(x, 1.5 * R)
    E = solve_obstacle_set(space, A, ball(space, x, 1.5 * R)).set
    stripe = (d >= 5 * R / 16) & (d < 2 * R / 5)
    dens = ball_densities(space, E, 4 * space.spacing)
    density_max = float(dens[stripe].max()) if stripe.any() else 0.0
    if density_max < 1e-12:
        density_max = 0.0
    cap = variational_capacity(space, A, space.window(x, 2 * R)).value
    bound = C4 * R * cap / space.measure(ball(space, x, R))
    return density_max, bound


@dataclass(frozen=True, eq=False)
class StrongCartanResult:
    levels: int
    radii: list[float]
    capacities: list[float]
    budget_base: float
    nested_sets: list[CellSet] = field(repr=False)
    stacked: GridFunction = field(repr=False)
    value_at_x: float = 0.0
    divergence_witness: list[float] = field(default_factory=list)
    partial: bool = False
    message: str = ""


def strong_cartan_construct(
    space: GridSpace,
    A: CellSet,
    x=(0.0, 0.0),
    R: float = 0.5,
    k_max: int = 4,
    verdict: ThinnessVerdict | None = None,
    override: bool = False,
    use_approximate_limits: bool = True,
) -> StrongCartanResult:
    """Stack capacity extremal sets over shrinking radii.

    For ``i = 1..k_max`` the largest dyadic radius ``r_i < r_{i-1}`` with
    ``rcap(A ∩ B(x, r_i), B(x, R)) < 2**-i * rcap(A ∩ B(x, R/2), B(x, R))``
    is selected and ``E_i`` is the extremal set of that problem.  The stacked
    function ``u = sum of chi_{E_i}`` is integer valued; the divergence witness
    records the minimum of ``u`` (or of its lower approximate limit) over
    ``A ∩ B(x, r_k)``.
    """
    space.check_owns(A)
    if k_max < 1:
        raise InvalidArgument("k_max must be >= 1")
    spec = space.weight_spec
    if space.dim != 2 or spec.kind != "power_law" or not -2 < spec.a < -1:
        raise InvalidArgument("needs a 2D power-law space with exponent in (-2, -1)")
    space.check_ball_inside(x, R)
    if verdict is not None and verdict.classification != "thin" and not override:
        raise PreconditionError(
            f"A is classified {verdict.classification} at x; pass override=True to proceed"
        )
    h = space.spacing
    window = ball(space, x, R)
    base = variational_capacity(space, A & ball(space, x, R / 2), window).value
    radii, caps, sets = [], [], []
    r = R / 2
    partial, message = False, ""
    for i in range(1, k_max + 1):
        budget = 2.0**-i * base
        found = None
        while r >= 4 * h * (1 - 1e-12):
            inner = A & ball(space, x, r)
            if not inner:
                # an empty piece meets any budget but witnesses nothing
                break
            res = variational_capacity(space, inner, window)
            if res.value < budget:
                found = res
                break
            r /= 2
        if found is None:
            partial = True
            message = (
                f"level {i}: no radius >= 4h with A ∩ B(x, r) nonempty meets the budget"
            )
            break
        radii.append(r)
        caps.append(found.value)
        sets.append(found.extremal_set)
        r /= 2
    u = np.zeros(space.n_cells)
    for E in sets:
        u += E.mask
    stacked = GridFunction(space, u)
    value_at_x = float(u[space.cell_at(x)])
    witness = []
    for k, rk in enumerate(radii, start=1):
        cells = (A & ball(space, x, rk)).indices
        if cells.size == 0:
            witness.append(math.inf)
            continue
        if use_approximate_limits:
            vals = [
                approx_limits(space, u, space.centers[c], 4 * h, 8 * h).lower for c in cells
            ]
            witness.append(float(min(vals)))
        else:
            witness.append(float(u[cells].min()))
    return StrongCartanResult(
        len(sets), radii, caps, base, sets, stacked, value_at_x, witness, partial, message
    )


def cusp_set(space: GridSpace, x=(0.0, 0.0), R: float = 0.5) -> CellSet:
    """Cells with ``0 < s <= R/2`` and ``|t| <= s**2 / R`` around ``x``."""
    c = space._point(x)
    return space.where(
        lambda s, t: ((s - c[0]) > 0)
        & ((s - c[0]) <= R / 2)
        & (np.abs(t - c[1]) <= (s - c[0]) ** 2 / R)
    )


# --------------------------------------------------------------------------
# chain of rectangles
# --------------------------------------------------------------------------


def counterexample_set(space: GridSpace, eps: float, chain_depth: int) -> CellSet:
    """Union of ``A_j = [10^-j (1 - eps), 10^-j] x [0, 10^-2j eps]``, ``j < chain_depth``.

    A cell belongs to the set when it overlaps a rectangle in positive area.
    """
    h = space.spacing
    lo = space.centers - h / 2
    hi = space.centers + h / 2
    mask = np.zeros(space.n_cells, dtype=bool)
    for j in range(chain_depth):
        x0, x1 = 10.0**-j * (1 - eps), 10.0**-j
        y0, y1 = 0.0, 10.0 ** (-2 * j) * eps
        mask |= (lo[:, 0] < x1) & (hi[:, 0] > x0) & (lo[:, 1] < y1) & (hi[:, 1] > y0)
    return CellSet(space, mask)


@dataclass(frozen=True, eq=False)
class CounterexampleReport:
    eps: float
    resolution: int
    chain_depth: int
    space: GridSpace = field(repr=False)
    A: CellSet = field(repr=False)
    E: CellSet = field(repr=False)
    symmetric_difference: float = 0.0
    identity_bound: float = 0.0
    capacities: dict[float, float] = field(default_factory=dict)
    capacity_bounds: dict[float, tuple[float, float]] = field(default_factory=dict)
    stripe_density_max: float = 0.0
    stripe_bound: float = 0.0
    profile: ThinnessProfile | None = None
    origin_density: float = 0.0
    checks: list[Check] = field(default_factory=list)


def counterexample_run(
    eps: float = 0.1,
    resolution: int = 2048,
    chain_depth: int = 2,
    capacity_radii: tuple[float, ...] = (1.0,),
    delta: float = 0.25,
    profile_depth: int | None = None,
) -> CounterexampleReport:
    """Solve the obstacle problem for a chain of shrinking rectangles.

    The grid covers ``[-2, 2]^2``.  The obstacle problem is solved in
    ``B(0, 2)`` minus the two outermost cell layers.  Reported: the measure of
    ``E Δ A`` against ``4h P(A)``, the capacities of ``A ∩ B(0, R)`` in
    ``B(0, 2R)`` against ``[R eps / 10 (1 - delta), 3 R eps (1 + delta)]``, the
    stripe density of the solution, a thinness profile at the origin and the
    density of ``E`` there.
    """
    if not 0 < eps < 0.2:
        raise InvalidArgument("eps must lie in (0, 1/5)")
    if chain_depth < 1:
        raise InvalidArgument("chain_depth must be >= 1")
    extent = 2.0
    h = 2 * extent / resolution
    smallest_width = 10.0 ** -(chain_depth - 1) * eps
    if h > smallest_width / 4:
        raise ResolutionInsufficient(
            f"h = {h:g} does not resolve the width {smallest_width:g} of the last rectangle"
        )
    space = build_grid(2, extent, resolution)
    origin = np.zeros(2)
    A = counterexample_set(space, eps, chain_depth)
    window = space.window(origin, 2.0)
    E = solve_obstacle_set(space, A, window).set
    checks = []

    sym = space.measure(E ^ A)
    bound = 4 * h * perimeter(space, A)
    checks.append(Check("solution_identity", 2.0, sym, bound, 0.0, sym <= bound))

    caps, cap_bounds = {}, {}
    for R in capacity_radii:
        outer = space.window(origin, 2 * R)
        cap = variational_capacity(space, A & ball(space, origin, R), outer).value
        lo, hi = R * eps / 10 * (1 - delta), 3 * R * eps * (1 + delta)
        caps[R], cap_bounds[R] = cap, (lo, hi)
        checks.append(Check("capacity_lower", R, lo, cap, delta, lo <= cap))
        checks.append(Check("capacity_upper", R, cap, hi, delta, cap <= hi))

    density_max, s_bound = smallness_in_annuli_check(space, A & ball(space, origin, 1.0), origin, 1.0)
    checks.append(Check("stripe_density", 1.0, density_max, 0.0, 0.0, density_max == 0.0))

    R0 = 0.5
    if profile_depth is None:
        # stay above the innermost rectangle so the truncated chain is not probed
        innermost = 10.0 ** -(chain_depth - 1)
        profile_depth = max(1, int(math.floor(math.log2(R0 / innermost))))
    prof = thinness_profile(space, A, origin, 2.0, R0, profile_depth, check_windows=False)
    floor_val = eps / (10 * math.pi) * (1 - delta)
    for i in range(prof.resolution_floor + 1):
        checks.append(
            Check("thickness", prof.radii[i], prof.ratios[i], floor_val, delta,
                  prof.ratios[i] >= floor_val)
        )
    r_small = prof.radii[prof.resolution_floor]
    Bs = ball(space, origin, r_small)
    dens = space.measure(E & Bs) / space.measure(Bs)
    checks.append(Check("origin_density", r_small, dens, VANISHING_TOL, VANISHING_TOL,
                        dens <= VANISHING_TOL))
    return CounterexampleReport(
        eps, resolution, chain_depth, space, A, E, sym, bound, caps, cap_bounds,
        density_max, s_bound, prof, dens, checks,
    )
