from __future__ import annotations

import numpy as np
import pytest
from helpers import random_cut_problems

from bvlab import CellSet, InvalidArgument, Unsupported, ball, build_grid
from bvlab.bv import perimeter
from bvlab.flow import CutProblem, cut_value, enumerate_oracle, min_cut


def test_single_cell_source_in_5x5():
    s = build_grid(2, 2.5, 5)  # h = 1
    c = s.cell_at((0, 0))
    src = s.cells([c])
    snk = s.boundary_layer - src
    free = ~(src | snk)
    res = min_cut(CutProblem(src, snk, free))
    assert res.value == pytest.approx(4.0)
    assert res.set == src
    assert res.flow_value == pytest.approx(4.0)


def test_problem_validation():
    s = build_grid(2, 1.0, 4)
    a = s.cells([0, 1])
    with pytest.raises(InvalidArgument):
        CutProblem(a, a)
    with pytest.raises(InvalidArgument):
        CutProblem(a, s.cells([2]), s.cells([3]))  # does not cover the grid
    p = CutProblem(a, s.cells([2]))
    assert len(p.free) == 13


def test_empty_sources_give_empty_set():
    s = build_grid(2, 1.0, 4)
    res = min_cut(CutProblem(s.empty(), s.cells([0])))
    assert res.value == 0.0 and not res.set


def test_cut_value_matches_perimeter():
    s = build_grid(2, 1.0, 16)
    E = ball(s, (0.1, -0.2), 0.4)
    assert cut_value(s, E.mask) == pytest.approx(perimeter(s, E))


def test_min_cut_agrees_with_oracle():
    for prob in random_cut_problems(150, seed=7, max_free=14):
        a, b = min_cut(prob), enumerate_oracle(prob)
        assert a.value == pytest.approx(b.value, rel=1e-12, abs=1e-15)
        assert a.set == b.set
        assert a.flow_value == pytest.approx(a.value, rel=1e-9)


def test_minimal_minimizer_on_ties():
    # a free ring around a source square: enclosing the ring costs the same as
    # not enclosing it only when weights are symmetric; minimal set must be
    # the source itself whenever that is optimal
    s = build_grid(2, 2.0, 4)  # h = 1, unit edge weights
    src = s.cells([s.cell_at((-0.5, -0.5))])
    free = s.cells([s.cell_at((0.5, -0.5))])
    snk = ~(src | free)
    res = min_cut(CutProblem(src, snk, free))
    # adding the free cell keeps the value at 4 (gain 1 face, lose 1 face)
    assert res.value == pytest.approx(4.0)
    assert res.set == src
    assert enumerate_oracle(CutProblem(src, snk, free)).set == src


def test_oracle_limit():
    s = build_grid(2, 1.0, 6)
    with pytest.raises(Unsupported):
        enumerate_oracle(CutProblem(s.cells([0]), s.cells([1])))


def test_large_solve_is_exact_on_disc():
    s = build_grid(2, 1.0, 128)
    A = ball(s, (0, 0), 0.3)
    omega = ball(s, (0, 0), 0.8)
    res = min_cut(CutProblem(A, ~omega, omega - A))
    # a disc is its own solution: any superset inside omega has larger l1 perimeter
    assert res.set == A
    assert res.value == pytest.approx(perimeter(s, A))
    assert isinstance(res.set, CellSet)
    assert np.all(res.saturated_edges >= 0)
