from __future__ import annotations

import math

import numpy as np
import pytest

from bvlab import (
    InvalidArgument,
    PreconditionError,
    ResolutionInsufficient,
    WeightSpec,
    ball,
    build_grid,
)
from bvlab.fine import (
    BOXING_CONSTANT,
    boxing_check,
    capacity_shrink_profile,
    classify,
    density_point_capacity_check,
    origin_cells,
    point_thickness_experiment,
    thinness_profile,
)

GRID = build_grid(2, 1.0, 256)


def test_full_set_is_thick_and_empty_is_thin():
    full = thinness_profile(GRID, GRID.full(), (0, 0), R=0.25, depth=3)
    assert classify(full).classification == "thick"
    empty = thinness_profile(GRID, GRID.empty(), (0, 0), R=0.25, depth=3)
    assert empty.ratios == [0.0] * 4
    assert classify(empty).classification == "thin"


def test_profile_radii_and_floor():
    prof = thinness_profile(GRID, GRID.full(), (0, 0), R=0.25, depth=5)
    assert prof.radii == [0.25 * 2.0**-i for i in range(6)]
    # 8h = 1/16: the radii 1/4, 1/8, 1/16 are trusted
    assert prof.resolution_floor == 2
    assert len(prof.trusted) == 3


def test_halfplane_profile_is_scale_invariant():
    E = GRID.where(lambda x, y: x > 0)
    prof = thinness_profile(GRID, E, (0, 0), R=0.25, depth=2)
    t = prof.trusted
    assert max(t) / min(t) < 1.1
    assert not prof.is_strictly_decreasing() or t[0] / t[-1] < 1.1


def test_classify_validation_and_inconclusive():
    prof = thinness_profile(GRID, GRID.full(), (0, 0), R=0.25, depth=3)
    with pytest.raises(InvalidArgument):
        classify(prof, 0.5, 0.1)
    assert classify(prof, 0.01, 100.0).classification == "inconclusive"


def test_profile_rejects_bad_arguments():
    with pytest.raises(InvalidArgument):
        thinness_profile(GRID, GRID.full(), (0, 0), M=1.0)
    with pytest.raises(InvalidArgument):
        thinness_profile(GRID, GRID.full(), (0, 0), depth=0)


def test_boxing_check_small_set():
    s = GRID
    E = ball(s, (0.05, 0.0), 0.05)
    cap, per = boxing_check(s, E, (0, 0), 0.125)
    assert 0 < cap <= BOXING_CONSTANT * per
    with pytest.raises(PreconditionError):
        boxing_check(s, s.where(lambda x, y: x > 0), (0, 0), 0.125)
    with pytest.raises(ResolutionInsufficient):
        boxing_check(s, E, (0, 0), 4 * s.spacing)


def test_density_point_capacity_lower_bound():
    s = GRID
    A = ball(s, (0, 0), 0.2)
    witness, lower, cap = density_point_capacity_check(s, A, (0, 0), 0.2)
    assert cap >= lower
    assert witness <= 0.2
    with pytest.raises(PreconditionError):
        density_point_capacity_check(s, A, (0.6, 0.6), 0.1)


def test_origin_cells():
    s = build_grid(2, 1.0, 8)
    cells = origin_cells(s)
    assert len(cells) == 4
    assert np.allclose(np.abs(s.centers[cells.indices]), s.spacing / 2)


def test_point_thickness_power_law():
    s = build_grid(2, 1.0, 256, WeightSpec.power_law(-1.5))
    rep = point_thickness_experiment(s, depth=4, r0=0.5)
    assert rep.decreasing
    assert rep.oracle_ratio == pytest.approx(2**-0.5)
    for q in rep.successive_ratios:
        assert q == pytest.approx(rep.oracle_ratio, rel=0.15)
    assert rep.profile_min >= 1e-2


def test_point_thickness_uniform_contrast():
    rep = point_thickness_experiment(GRID, depth=3, r0=0.5)
    assert rep.oracle_ratio == pytest.approx(2.0)
    assert not rep.decreasing
    # the origin block has fixed size h, so r * cap / mu(B(0, r)) grows like h / r
    t = rep.profile.trusted
    assert all(b > a for a, b in zip(t, t[1:]))


def test_point_thickness_rejects_other_exponents():
    with pytest.raises(InvalidArgument):
        point_thickness_experiment(build_grid(2, 1.0, 64, WeightSpec.power_law(-0.5)))


def test_capacity_shrink_profile_decreases():
    s = GRID
    A = s.where(lambda x, y: (x > 0) & (np.abs(y) < 0.02))
    caps = capacity_shrink_profile(s, A, (0, 0), 0.5, [0.25, 0.125, 0.0625])
    assert caps[0] > caps[1] > caps[2] > 0
    with pytest.raises(InvalidArgument):
        capacity_shrink_profile(s, A, (0, 0), 0.5, [0.125, 0.25])
    assert math.isfinite(caps[0])
