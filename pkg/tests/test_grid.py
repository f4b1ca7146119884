from __future__ import annotations

import math

import numpy as np
import pytest

from bvlab import (
    BoundaryContact,
    CellSet,
    InvalidArgument,
    Unsupported,
    WeightSpec,
    annulus,
    ball,
    build_grid,
    closed_ball,
    estimate_constants,
)


def test_weight_spec_parse_roundtrip():
    w = WeightSpec.parse("power_law(-1.5)")
    assert w.kind == "power_law" and w.a == -1.5
    assert WeightSpec.parse(str(w)) == w
    assert WeightSpec.parse("uniform") == WeightSpec.uniform()
    with pytest.raises(InvalidArgument):
        WeightSpec.parse("gaussian")


def test_uniform_grid_geometry():
    s = build_grid(2, 1.0, 8)
    assert s.n_cells == 64
    assert s.shape == (8, 8)
    assert s.spacing == pytest.approx(0.25)
    assert s.total_measure == pytest.approx(4.0)
    assert np.allclose(s.cell_measures, 0.0625)
    # C-order with axis 0 = x
    assert s.centers[1, 0] == s.centers[0, 0]
    assert s.centers[8, 0] > s.centers[0, 0]
    # every interior cell has 4 neighbors: 2 * 8 * 7 edges in total
    assert s.edge_u.size == 2 * 8 * 7
    assert np.allclose(s.edge_weights, s.spacing)


def test_odd_uniform_resolution_allowed_but_not_weighted():
    assert build_grid(2, 1.0, 3).n_cells == 9
    with pytest.raises(InvalidArgument):
        build_grid(2, 1.0, 5, WeightSpec.power_law(-1.0))
    with pytest.raises(InvalidArgument):
        build_grid(2, 1.0, 2)


@pytest.mark.parametrize("a", [-2.0, 1.0, 1.5])
def test_power_law_exponent_range(a):
    with pytest.raises(InvalidArgument):
        build_grid(2, 1.0, 16, WeightSpec.power_law(a))


def test_power_law_total_measure_matches_continuum():
    a = -1.5
    s = build_grid(2, 1.0, 256, WeightSpec.power_law(a))
    r = 0.5
    exact = 2 * math.pi * r ** (2 + a) / (2 + a)
    assert s.measure(ball(s, (0, 0), r)) == pytest.approx(exact, rel=1e-2)
    ring = annulus(s, (0, 0), 0.25, 0.5)
    exact_ring = exact - 2 * math.pi * 0.25 ** (2 + a) / (2 + a)
    assert ring.measure == pytest.approx(exact_ring, rel=1e-2)


def test_edge_weights_are_face_averages():
    s = build_grid(2, 1.0, 8, WeightSpec.power_law(-1.0))
    w = s.weights
    expected = s.spacing * (w[s.edge_u] + w[s.edge_v]) / 2
    assert np.allclose(s.edge_weights, expected)


def test_cellset_algebra():
    s = build_grid(2, 1.0, 8)
    A = ball(s, (0, 0), 0.5)
    B = s.where(lambda x, y: x > 0)
    assert (A | B) >= A
    assert (A & B) <= A
    assert (A - B) == (A & ~B)
    assert len(A ^ B) == len(A | B) - len(A & B)
    assert not s.empty()
    assert s.full().measure == pytest.approx(s.total_measure)
    c = s.cell_at((0.1, 0.1))
    assert c in A
    assert A.dilate(1) >= A
    with pytest.raises(InvalidArgument):
        A | CellSet(build_grid(2, 1.0, 8), A.mask)


def test_ball_variants():
    s = build_grid(2, 1.0, 16)
    r = s.spacing * math.sqrt(2.5)  # passes through the centers at (1.5h, 0.5h)
    assert closed_ball(s, (0, 0), r) >= ball(s, (0, 0), r)
    assert len(closed_ball(s, (0, 0), r)) > len(ball(s, (0, 0), r))


def test_boundary_contact_and_window():
    s = build_grid(2, 1.0, 32)
    s.check_ball_inside((0, 0), 0.5)
    with pytest.raises(BoundaryContact):
        s.check_ball_inside((0.8, 0), 0.5)
    w = s.window((0, 0), 1.0)
    assert not (w & s.boundary_layer)
    with pytest.raises(BoundaryContact):
        s.window((0.5, 0), 1.0)


def test_scaled_space():
    s = build_grid(2, 1.0, 8)
    t = s.scaled(3.0)
    assert t.extent == s.extent
    assert t.total_measure == pytest.approx(3 * s.total_measure)
    assert np.allclose(t.edge_weights, 3 * s.edge_weights)


def test_estimate_constants():
    s = build_grid(2, 1.0, 64)
    c = estimate_constants(s)
    assert c.dimension_exponent == 2
    assert 3.5 < c.doubling < 5.0
    with pytest.raises(Unsupported):
        estimate_constants(build_grid(2, 1.0, 8))
    w = estimate_constants(build_grid(2, 1.0, 128, WeightSpec.power_law(-1.5)))
    assert w.dimension_exponent == pytest.approx(0.5, abs=0.1)
