from __future__ import annotations

import math

import numpy as np
import pytest
from helpers import random_window_instances

from bvlab import (
    BoundaryContact,
    Infeasible,
    InvalidArgument,
    ResolutionInsufficient,
    ball,
    build_grid,
)
from bvlab.bv import GridFunction, perimeter
from bvlab.flow import CutProblem, enumerate_oracle
from bvlab.variational import (
    ObstacleSpec,
    capacity_ball_comparison,
    degiorgi_check,
    degiorgi_slack,
    semicontinuity_probe,
    solve_obstacle_general,
    solve_obstacle_set,
    variational_capacity,
    verify_superminimizer,
    weak_harnack_check,
)

GRID = build_grid(2, 1.0, 64)


def test_set_solution_fills_notch():
    s = GRID
    omega = ball(s, (0, 0), 0.8)
    outer = s.where(lambda x, y: (np.abs(x) < 0.4) & (np.abs(y) < 0.4))
    notch = s.where(lambda x, y: (np.abs(x) < 0.2) & (y > 0.0))
    A = outer - notch
    sol = solve_obstacle_set(s, A, omega)
    assert sol.set >= A
    assert sol.set == outer
    assert sol.perimeter_value == pytest.approx(perimeter(s, outer))


def test_set_solution_validation():
    s = GRID
    omega = ball(s, (0, 0), 0.5)
    with pytest.raises(InvalidArgument):
        solve_obstacle_set(s, ball(s, (0, 0), 0.6), omega)
    with pytest.raises(BoundaryContact):
        solve_obstacle_set(s, s.empty(), s.full())
    assert issubclass(BoundaryContact, InvalidArgument)


def test_capacity_of_disc_is_its_perimeter():
    s = build_grid(2, 1.0, 128)
    A = ball(s, (0, 0), 0.25)
    res = variational_capacity(s, A, ball(s, (0, 0), 0.9))
    assert res.value == pytest.approx(perimeter(s, A))
    assert variational_capacity(s, s.empty(), ball(s, (0, 0), 0.9)).value == 0.0


def test_windowed_problems_agree_with_oracle():
    for s, A, omega in random_window_instances(60, seed=3):
        o = enumerate_oracle(CutProblem(A, ~omega, omega - A))
        sol = solve_obstacle_set(s, A, omega)
        cap = variational_capacity(s, A, omega)
        assert cap.value == pytest.approx(o.value, rel=1e-12, abs=1e-15)
        assert sol.set == o.set


def test_general_obstacle_stacks_levels():
    s = GRID
    omega = ball(s, (0, 0), 0.8)
    psi = np.zeros(s.n_cells)
    psi[ball(s, (0, 0), 0.2).mask] = 2.0
    psi[ball(s, (0.4, 0), 0.1).mask] = 1.0
    u = solve_obstacle_general(s, ObstacleSpec(omega, psi, None, (0.0, 1.0, 2.0)))
    v = u.values
    assert np.all(v[omega.mask] >= psi[omega.mask])
    assert np.all(v[~omega.mask] == 0.0)
    assert set(np.unique(v)) <= {0.0, 1.0, 2.0}
    # superlevel sets are nested set solutions
    assert u.superlevel(1.5) <= u.superlevel(0.5)
    with pytest.raises(Infeasible):
        solve_obstacle_general(s, ObstacleSpec(omega, psi * 2, None, (0.0, 1.0, 2.0)))
    with pytest.raises(InvalidArgument):
        solve_obstacle_general(s, ObstacleSpec(omega, psi, np.full(s.n_cells, 0.5), (0.0, 1.0, 2.0)))


def test_capacity_ball_comparison_monotone():
    s = build_grid(2, 1.0, 128)
    A = ball(s, (0, 0), 0.1)
    cap_t, cap_s, ratio = capacity_ball_comparison(s, A, (0, 0), 0.2, 1.5, 3.0)
    assert cap_t <= cap_s
    assert ratio >= 1.0
    with pytest.raises(InvalidArgument):
        capacity_ball_comparison(s, A, (0, 0), 0.2, 3.0, 1.5)


def test_solution_is_superminimizer():
    s = GRID
    omega = ball(s, (0, 0), 0.8)
    A = s.where(lambda x, y: (np.abs(x) < 0.4) & (np.abs(y) < 0.4)) - s.where(
        lambda x, y: (np.abs(x) < 0.2) & (y > 0.0)
    )
    E = solve_obstacle_set(s, A, omega).set
    rep = verify_superminimizer(s, E, omega, trials=100, rng_seed=1)
    assert rep.ok and rep.max_excess <= 1e-9


def test_checkerboard_is_not_superminimizer():
    s = build_grid(2, 1.0, 16)
    idx = s.multi_index
    board = GridFunction(s, ((idx[:, 0] + idx[:, 1]) % 2).astype(float))
    rep = verify_superminimizer(s, board, ball(s, (0, 0), 0.7), trials=50, rng_seed=0)
    assert not rep.ok


def test_degiorgi_on_halfplane():
    s = build_grid(2, 1.0, 128)
    E = s.where(lambda x, y: x > 0)
    lhs, rhs = degiorgi_check(s, E, (0.0, 0.0), 0.5, 0.2, 0.4)
    assert lhs <= rhs * degiorgi_slack(s, 0.2, 0.4)
    assert degiorgi_slack(s, 0.2, 0.4) == pytest.approx(1 + 4 * s.spacing / 0.2)
    with pytest.raises(InvalidArgument):
        degiorgi_check(s, E, (0.0, 0.0), 0.5, 0.2, 0.2 + s.spacing)


def test_weak_harnack_halfplane():
    s = build_grid(2, 1.0, 128)
    E = s.where(lambda x, y: x > 0)
    sup_val, term, c = weak_harnack_check(s, E, (0.0, 0.0), 0.1, 0.2, 0.0, Q=2.0)
    assert sup_val == 1.0
    assert term == pytest.approx((0.2 / 0.1) ** 2 * 0.5, rel=0.05)
    assert c == pytest.approx(1.0 / term)
    with pytest.raises(InvalidArgument):
        weak_harnack_check(s, E, (0.0, 0.0), 0.2, 0.1, 0.0, Q=2.0)


def test_semicontinuity_probe_flags_only_holes():
    s = GRID
    omega = ball(s, (0, 0), 0.8)
    E = s.where(lambda x, y: x > 0)
    clean = semicontinuity_probe(s, E, omega, [0.25, 0.125])
    assert clean.n_flags == 0
    # a single missing cell inside E: the lower limit stays 1 while the minimum drops
    v = E.mask.astype(float)
    v[s.cell_at((0.3, 0.0))] = 0.0
    holed = semicontinuity_probe(s, v, omega, [0.25, 0.125], density_tol=0.03)
    assert holed.n_flags > 0
    assert math.isnan(holed.lower[s.cell_at((0.95, 0.95))])
    with pytest.raises(ResolutionInsufficient):
        semicontinuity_probe(s, E, omega, [s.spacing])
