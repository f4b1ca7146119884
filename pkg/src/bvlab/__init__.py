"""Discrete BV calculus, 1-capacities and fine topology on weighted grids."""

from __future__ import annotations

from .errors import (
    BoundaryContact,
    BVLabError,
    Infeasible,
    InvalidArgument,
    PreconditionError,
    ResolutionInsufficient,
    Unsupported,
)
from .grid import (
    CellSet,
    GridSpace,
    SpaceConstants,
    WeightSpec,
    annulus,
    ball,
    build_grid,
    closed_ball,
    estimate_constants,
)

__version__ = "0.1.0"
