from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvlab import InvalidArgument, ResolutionInsufficient, WeightSpec, ball, build_grid
from bvlab.bv import (
    GridFunction,
    approx_limits,
    coarea_check,
    indicator,
    isoperimetric_check,
    mt_split,
    perimeter,
    total_variation,
)

SMALL = build_grid(2, 1.0, 6)
SMALL_W = build_grid(2, 1.0, 6, WeightSpec.power_law(-1.0))

masks = st.lists(st.booleans(), min_size=36, max_size=36).map(np.array)


def test_grid_function_validation():
    s = build_grid(2, 1.0, 4)
    with pytest.raises(InvalidArgument):
        GridFunction(s, np.zeros(5))
    with pytest.raises(InvalidArgument):
        GridFunction(s, np.full(16, np.nan))
    u = GridFunction(s, np.arange(16.0))
    assert len(u.superlevel(7.5)) == 8
    assert list(u.levels()[:2]) == [0.0, 1.0]


def test_perimeter_of_square_and_center_cell():
    s = build_grid(2, 1.0, 5)
    center = s.cells([s.cell_at((0, 0))])
    # four faces of length h with unit weight
    assert perimeter(s, center) == pytest.approx(4 * s.spacing)
    sq = s.where(lambda x, y: (np.abs(x) < 0.5) & (np.abs(y) < 0.5))
    side = math.sqrt(len(sq)) * s.spacing
    assert perimeter(s, sq) == pytest.approx(4 * side)


def test_region_halves_boundary_edges():
    s = build_grid(2, 1.0, 8)
    E = s.where(lambda x, y: x > 0)
    left = s.where(lambda x, y: x < 0)
    right = ~left
    # the cut edges straddle the two regions, each gets half
    total = perimeter(s, E)
    assert perimeter(s, E, left) == pytest.approx(total / 2)
    assert perimeter(s, E, right) == pytest.approx(total / 2)
    assert perimeter(s, E, s.full()) == pytest.approx(total)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=36, max_size=36), st.booleans())
def test_coarea_exact(vals, weighted):
    s = SMALL_W if weighted else SMALL
    lhs, rhs = coarea_check(s, np.array(vals, dtype=float))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(masks, masks)
def test_perimeter_submodular(a, b):
    A, B = SMALL.cells(a), SMALL.cells(b)
    lhs = perimeter(SMALL, A | B) + perimeter(SMALL, A & B)
    assert lhs <= perimeter(SMALL, A) + perimeter(SMALL, B) + 1e-12


@settings(max_examples=60, deadline=None)
@given(masks)
def test_perimeter_complement_symmetric(a):
    A = SMALL_W.cells(a)
    assert perimeter(SMALL_W, A) == pytest.approx(perimeter(SMALL_W, ~A), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(masks, masks, masks)
def test_perimeter_region_monotone(a, r1, r2):
    A = SMALL.cells(a)
    small = SMALL.cells(r1 & r2)
    big = SMALL.cells(r1)
    assert perimeter(SMALL, A, small) <= perimeter(SMALL, A, big) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=36, max_size=36), st.floats(-3, 3))
def test_tv_translation_invariant(vals, c):
    v = np.array(vals)
    assert total_variation(SMALL, v + c) == pytest.approx(total_variation(SMALL, v), abs=1e-9)


def test_tv_accepts_sets_and_functions():
    E = ball(SMALL, (0, 0), 0.5)
    assert total_variation(SMALL, E) == perimeter(SMALL, E)
    assert total_variation(SMALL, indicator(E)) == perimeter(SMALL, E)


def test_approx_limits_at_jump_and_interior():
    s = build_grid(2, 1.0, 64)
    E = s.where(lambda x, y: x > 0)
    on_edge = approx_limits(s, E, (0.0, 0.0))
    assert (on_edge.lower, on_edge.upper) == (0.0, 1.0)
    assert on_edge.jumps
    inside = approx_limits(s, E, (0.5, 0.0))
    assert (inside.lower, inside.upper) == (1.0, 1.0)
    with pytest.raises(ResolutionInsufficient):
        approx_limits(s, E, (0.0, 0.0), r_min=s.spacing)


def test_approx_limits_ignore_isolated_cells():
    s = build_grid(2, 1.0, 64)
    v = np.zeros(s.n_cells)
    v[s.cell_at((0.01, 0.01))] = 10.0
    # one cell is about 2% of a ball of radius 4h
    assert approx_limits(s, v, (0.0, 0.0), density_tol=0.05).upper == 0.0
    assert approx_limits(s, v, (0.0, 0.0), density_tol=0.01).upper == 10.0


def test_mt_split_partitions():
    s = build_grid(2, 1.0, 64)
    E = ball(s, (0, 0), 0.5)
    split = mt_split(s, E, density_tol=0.25)
    assert (split.interior | split.boundary | split.exterior) == s.full()
    assert not (split.interior & split.exterior)
    assert s.cell_at((0, 0)) in split.interior
    assert s.cell_at((0.9, 0.9)) in split.exterior
    assert s.cell_at((0.5, 0.0)) in split.boundary


def test_isoperimetric_halfplane_value():
    s = build_grid(2, 1.0, 128)
    E = s.where(lambda x, y: x > 0)
    r = 0.25
    ratio = isoperimetric_check(s, E, (0.0, 0.0), r)
    # half disc area over r times the diameter: (pi r^2 / 2) / (r * 2r)
    assert ratio == pytest.approx(math.pi / 4, rel=0.02)
    with pytest.raises(ResolutionInsufficient):
        isoperimetric_check(s, E, (0.0, 0.0), 2 * s.spacing)
    assert isoperimetric_check(s, s.empty(), (0.0, 0.0), r) == 0.0
