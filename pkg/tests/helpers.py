"""Seeded random instances shared by the oracle tests."""

from __future__ import annotations

import numpy as np

from bvlab import CellSet, WeightSpec, build_grid
from bvlab.flow import CutProblem

WEIGHTS = (WeightSpec.uniform(), WeightSpec.power_law(-1.0), WeightSpec.power_law(0.5))


def random_cut_problems(n: int, seed: int, max_free: int = 16):
    """Yield ``n`` labelled problems on 4x4 to 6x6 grids with ``|free| <= max_free``."""
    rng = np.random.default_rng(seed)
    spaces = {}
    made = 0
    while made < n:
        res = int(rng.choice([4, 6])) if made % 2 else int(rng.integers(4, 7))
        weight = WEIGHTS[made % 3] if res % 2 == 0 else WEIGHTS[0]
        key = (res, str(weight))
        if key not in spaces:
            spaces[key] = build_grid(2, 1.0, res, weight)
        space = spaces[key]
        p_free = rng.uniform(0.2, 0.7)
        labels = rng.choice(3, size=space.n_cells, p=[(1 - p_free) / 2, (1 - p_free) / 2, p_free])
        if (labels == 2).sum() > max_free or not (labels == 0).any():
            continue
        made += 1
        yield CutProblem(
            CellSet(space, labels == 0), CellSet(space, labels == 1), CellSet(space, labels == 2)
        )


def random_window_instances(n: int, seed: int):
    """Yield ``(space, A, omega)`` with ``omega`` inside the 4x4 core of an 8x8 grid."""
    rng = np.random.default_rng(seed)
    spaces = [build_grid(2, 1.0, 8, w) for w in WEIGHTS]
    core = (spaces[0].multi_index >= 2).all(axis=1) & (spaces[0].multi_index < 6).all(axis=1)
    made = 0
    while made < n:
        space = spaces[made % 3]
        omega = core & (rng.random(space.n_cells) < rng.uniform(0.6, 1.0))
        A = omega & (rng.random(space.n_cells) < rng.uniform(0.1, 0.5))
        if not omega.any():
            continue
        made += 1
        yield space, CellSet(space, A), CellSet(space, omega)
