"""Weighted regular grids standing in for a doubling metric measure space.

A :class:`GridSpace` covers ``[-L, L]^dim`` with ``resolution`` cells per axis.
Each cell ``c`` carries a measure ``mu_c`` (the integral of the density over
the cell) and each pair of face-adjacent cells carries a perimeter weight
``pi_cc' = h^(dim-1) * (w_c + w_c') / 2`` where ``w_c = mu_c / h^dim`` is the
cell-average density.  Distances are Euclidean distances between cell centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import BoundaryContact, InvalidArgument, Unsupported

__all__ = [
    "WeightSpec",
    "GridSpace",
    "CellSet",
    "SpaceConstants",
    "build_grid",
    "ball",
    "closed_ball",
    "annulus",
    "estimate_constants",
]

# Quadrature depth for the cells that touch a singular origin.
SINGULAR_DEPTH = 12
_SUBDIV = 4


@dataclass(frozen=True)
class WeightSpec:
    """Density of the measure: ``uniform`` (w = 1) or ``power_law`` (w = |x|^a)."""

    kind: str = "uniform"
    a: float = 0.0

    @classmethod
    def uniform(cls) -> "WeightSpec":
        return cls("uniform", 0.0)

    @classmethod
    def power_law(cls, a: float) -> "WeightSpec":
        return cls("power_law", float(a))

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """Parse ``uniform`` or ``power_law(-1.5)``."""
        text = text.strip().replace(" ", "")
        if text == "uniform":
            return cls.uniform()
        if text.startswith("power_law(") and text.endswith(")"):
            return cls.power_law(float(text[len("power_law("):-1]))
        raise InvalidArgument(f"unknown weight spec {text!r}")

    def __str__(self) -> str:
        return "uniform" if self.kind == "uniform" else f"power_law({self.a:g})"


@dataclass(frozen=True, eq=False)
class GridSpace:
    dim: int
    extent: float
    resolution: int
    weight_spec: WeightSpec
    weights: np.ndarray
    cell_measures: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_weights: np.ndarray
    weight_scale: float = 1.0

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.resolution

    h = spacing

    @property
    def n_cells(self) -> int:
        return self.resolution**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dim

    @cached_property
    def axis_coords(self) -> np.ndarray:
        return _axis_coords(self.resolution, self.spacing)

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(n_cells, dim)``."""
        grids = np.meshgrid(*([self.axis_coords] * self.dim), indexing="ij")
        out = np.stack([g.ravel() for g in grids], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def multi_index(self) -> np.ndarray:
        """Integer cell coordinates, shape ``(n_cells, dim)``."""
        idx = np.indices(self.shape).reshape(self.dim, -1).T
        idx.setflags(write=False)
        return idx

    @cached_property
    def total_measure(self) -> float:
        return float(self.cell_measures.sum())

    def distances(self, center: Sequence[float]) -> np.ndarray:
        c = self._point(center)
        return np.sqrt(((self.centers - c) ** 2).sum(axis=1))

    def cell_at(self, point: Sequence[float]) -> int:
        """Flat index of the cell containing ``point`` (ties go to the upper cell)."""
        p = self._point(point)
        ij = np.floor((p + self.extent) / self.spacing).astype(int)
        ij = np.clip(ij, 0, self.resolution - 1)
        return int(np.ravel_multi_index(tuple(ij), self.shape))

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)

    # -- cell sets ---------------------------------------------------------
    def cells(self, mask: np.ndarray | Iterable[int]) -> "CellSet":
        arr = np.asarray(mask)
        if arr.dtype == bool:
            return CellSet(self, arr.reshape(-1))
        out = np.zeros(self.n_cells, dtype=bool)
        out[arr.astype(int)] = True
        return CellSet(self, out)

    def empty(self) -> "CellSet":
        return CellSet(self, np.zeros(self.n_cells, dtype=bool))

    def full(self) -> "CellSet":
        return CellSet(self, np.ones(self.n_cells, dtype=bool))

    def measure(self, cells: "CellSet") -> float:
        self.check_owns(cells)
        return float(self.cell_measures[cells.mask].sum())

    def where(self, predicate) -> "CellSet":
        """Cells whose centers satisfy ``predicate(*coords)`` (vectorized)."""
        coords = [self.centers[:, k] for k in range(self.dim)]
        return CellSet(self, np.asarray(predicate(*coords), dtype=bool))

    def check_owns(self, obj) -> None:
        if getattr(obj, "space", None) is not self:
            raise InvalidArgument("object belongs to a different GridSpace")

    @cached_property
    def boundary_layer(self) -> "CellSet":
        """Cells whose centers lie within ``2h`` of the outer boundary."""
        idx = self.multi_index
        near = ((idx < 2) | (idx >= self.resolution - 2)).any(axis=1)
        return CellSet(self, near)

    def check_interior(self, cells: "CellSet", what: str = "window") -> None:
        """Raise :class:`BoundaryContact` if ``cells`` reaches the outer 2h layer."""
        if (cells.mask & self.boundary_layer.mask).any():
            raise BoundaryContact(f"{what} comes within 2h of the grid boundary")

    def check_ball_inside(self, center, radius: float, what: str = "ball") -> None:
        c = self._point(center)
        if np.any(c - radius < -self.extent + 2 * self.spacing - 1e-12) or np.any(
            c + radius > self.extent - 2 * self.spacing + 1e-12
        ):
            raise BoundaryContact(
                f"{what} B({tuple(np.round(c, 6))}, {radius:g}) comes within 2h "
                "of the grid boundary"
            )

    def window(self, center, radius: float) -> "CellSet":
        """``ball(center, radius)`` with the outer 2h layer removed.

        Meant for windows that reach the edge of the domain but not beyond it;
        a ball leaving ``[-L, L]^dim`` raises :class:`BoundaryContact`.
        """
        c = self._point(center)
        if np.any(np.abs(c) + radius > self.extent * (1 + 1e-12)):
            raise BoundaryContact(f"window of radius {radius:g} leaves the domain")
        return ball(self, c, radius) - self.boundary_layer

    # -- derived spaces ----------------------------------------------------
    def scaled(self, c: float) -> "GridSpace":
        """The same grid with every density multiplied by ``c > 0``."""
        if not c > 0:
            raise InvalidArgument("scale factor must be positive")
        return GridSpace(
            self.dim,
            self.extent,
            self.resolution,
            self.weight_spec,
            _frozen(self.weights * c),
            _frozen(self.cell_measures * c),
            self.edge_u,
            self.edge_v,
            _frozen(self.edge_weights * c),
            self.weight_scale * c,
        )

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(n_cells, 2*dim)`` neighbor indices, -1 where absent."""
        table = -np.ones((self.n_cells, 2 * self.dim), dtype=np.int64)
        grid_idx = np.arange(self.n_cells).reshape(self.shape)
        for ax in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            a = grid_idx[tuple(lo)].ravel()
            b = grid_idx[tuple(hi)].ravel()
            table[a, 2 * ax] = b
            table[b, 2 * ax + 1] = a
        return table

    def _point(self, center) -> np.ndarray:
        c = np.asarray(center, dtype=float).reshape(-1)
        if c.size == 1 and self.dim > 1:
            c = np.full(self.dim, float(c[0]))
        if c.size != self.dim:
            raise InvalidArgument(f"point must have {self.dim} coordinates")
        return c

    def __repr__(self) -> str:
        return (
            f"GridSpace(dim={self.dim}, extent={self.extent:g}, "
            f"resolution={self.resolution}, weights={self.weight_spec})"
        )


@dataclass(frozen=True, eq=False)
class CellSet:
    """A set of cells of one :class:`GridSpace`, stored as a boolean mask."""

    space: GridSpace = field(repr=False)
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        if mask.size != self.space.n_cells:
            raise InvalidArgument(
                f"mask has {mask.size} entries, space has {self.space.n_cells} cells"
            )
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    def _other(self, other: "CellSet") -> np.ndarray:
        if not isinstance(other, CellSet) or other.space is not self.space:
            raise InvalidArgument("set algebra across different spaces")
        return other.mask

    def __or__(self, other):
        return CellSet(self.space, self.mask | self._other(other))

    def __and__(self, other):
        return CellSet(self.space, self.mask & self._other(other))

    def __sub__(self, other):
        return CellSet(self.space, self.mask & ~self._other(other))

    def __xor__(self, other):
        return CellSet(self.space, self.mask ^ self._other(other))

    def __invert__(self):
        return CellSet(self.space, ~self.mask)

    def complement(self) -> "CellSet":
        return ~self

    def __le__(self, other) -> bool:
        return not (self.mask & ~self._other(other)).any()

    def __ge__(self, other) -> bool:
        return not (self._other(other) & ~self.mask).any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, CellSet) or other.space is not self.space:
            return NotImplemented
        return bool(np.array_equal(self.mask, other.mask))

    __hash__ = None

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def __contains__(self, cell: int) -> bool:
        return bool(self.mask[int(cell)])

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def measure(self) -> float:
        return float(self.space.cell_measures[self.mask].sum())

    def dilate(self, steps: int = 1) -> "CellSet":
        """Add every face neighbor, ``steps`` times."""
        table = self.space.neighbor_table
        mask = self.mask.copy()
        for _ in range(steps):
            nb = table[mask]
            nb = nb[nb >= 0]
            mask[nb] = True
        return CellSet(self.space, mask)

    def as_array(self) -> np.ndarray:
        return self.space.reshape(self.mask)


@dataclass(frozen=True)
class SpaceConstants:
    doubling: float
    dimension_exponent: float
    isoperimetric: float
    harnack: float | None = None
    dilation: float = 1.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _power_density(points: np.ndarray, a: float) -> np.ndarray:
    return np.sqrt((points**2).sum(axis=-1)) ** a


def _singular_corner_integral(h: float, dim: int, a: float) -> float:
    """Integral of |x|^a over the cube [0, h]^dim, by recursive subdivision.

    At each level the cube is split into 4 parts per axis; the parts away from
    the origin use the midpoint rule and the corner part is refined again.  The
    final corner cube at depth ``SINGULAR_DEPTH`` also uses the midpoint rule.
    """
    offsets = np.indices((_SUBDIV,) * dim).reshape(dim, -1).T
    regular = offsets[(offsets != 0).any(axis=1)]
    total = 0.0
    side = h
    for _ in range(SINGULAR_DEPTH):
        sub = side / _SUBDIV
        mids = (regular + 0.5) * sub
        total += float(_power_density(mids, a).sum()) * sub**dim
        side = sub
    total += float(_power_density(np.full(dim, 0.5 * side), a)) * side**dim
    return total


def _axis_coords(resolution: int, h: float) -> np.ndarray:
    # half-integer offsets are exact, so mirrored centers are exact negatives
    # and mirrored cells get bit-identical weights
    return (np.arange(resolution) - (resolution - 1) / 2) * h


def build_grid(
    dim: int,
    extent: float,
    resolution: int,
    weight_spec: WeightSpec | str = "uniform",
) -> GridSpace:
    """Build a weighted grid on ``[-extent, extent]^dim``.

    Cell measures use midpoint quadrature; under a power-law density the cells
    touching the origin are integrated by recursive subdivision instead.
    Uniform grids accept any resolution >= 3; weighted grids need an even one.
    """
    if isinstance(weight_spec, str):
        weight_spec = WeightSpec.parse(weight_spec)
    if dim not in (1, 2):
        raise InvalidArgument("dim must be 1 or 2")
    if not extent > 0:
        raise InvalidArgument("extent must be positive")
    if int(resolution) != resolution or resolution < 3:
        raise InvalidArgument("resolution must be an integer >= 3")
    resolution = int(resolution)
    if weight_spec.kind != "uniform" and (resolution < 4 or resolution % 2):
        # keeps every cell center off the singular origin
        raise InvalidArgument("weighted grids need an even resolution >= 4")
    h = 2.0 * extent / resolution
    n = resolution**dim

    if weight_spec.kind == "uniform":
        measures = np.full(n, h**dim)
        weights = np.ones(n)
    elif weight_spec.kind == "power_law":
        a = weight_spec.a
        if not (-dim < a < 1):
            raise InvalidArgument(
                f"power-law exponent {a} outside (-{dim}, 1): measure not locally finite"
            )
        coords = _axis_coords(resolution, h)
        grids = np.meshgrid(*([coords] * dim), indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=1)
        measures = _power_density(centers, a) * h**dim
        # cells with a corner at the origin: the middle 2^dim block
        mid = resolution // 2
        corner = np.indices((2,) * dim).reshape(dim, -1).T + (mid - 1)
        flat = np.ravel_multi_index(tuple(corner.T), (resolution,) * dim)
        measures[flat] = _singular_corner_integral(h, dim, a)
        weights = measures / h**dim
    else:
        raise InvalidArgument(f"unknown weight kind {weight_spec.kind!r}")

    grid_idx = np.arange(n).reshape((resolution,) * dim)
    us, vs = [], []
    for ax in range(dim):
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        us.append(grid_idx[tuple(lo)].ravel())
        vs.append(grid_idx[tuple(hi)].ravel())
    edge_u = np.concatenate(us)
    edge_v = np.concatenate(vs)
    edge_w = h ** (dim - 1) * 0.5 * (weights[edge_u] + weights[edge_v])

    return GridSpace(
        dim,
        float(extent),
        resolution,
        weight_spec,
        _frozen(weights),
        _frozen(measures),
        _frozen(edge_u),
        _frozen(edge_v),
        _frozen(edge_w),
    )


def ball(space: GridSpace, center, radius: float) -> CellSet:
    """Cells whose centers lie at distance ``< radius`` from ``center``."""
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    return CellSet(space, space.distances(center) < radius)


def closed_ball(space: GridSpace, center, radius: float) -> CellSet:
    if radius < 0:
        raise InvalidArgument("radius must be nonnegative")
    return CellSet(space, space.distances(center) <= radius)


def annulus(space: GridSpace, center, r_in: float, r_out: float) -> CellSet:
    """``ball(center, r_out)`` minus the closed ball of radius ``r_in``."""
    if r_in < 0 or not r_in < r_out:
        raise InvalidArgument("need 0 <= r_in < r_out")
    d = space.distances(center)
    return CellSet(space, (d < r_out) & (d > r_in))


def estimate_constants(space: GridSpace, samples: int = 32, seed: int = 0) -> SpaceConstants:
    """Empirical doubling constant and homogeneous dimension of ``space``."""
    if samples < 1:
        raise InvalidArgument("samples must be >= 1")
    if space.resolution < 16:
        raise Unsupported("resolution < 16 is too coarse to sample ball ratios")
    h, L = space.spacing, space.extent
    r_lo, r_hi = 4 * h, L / 4
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(samples):
        r = float(np.exp(rng.uniform(np.log(r_lo), np.log(r_hi))))
        # keep B(x, 2r) inside the domain
        x = rng.uniform(-L + 2 * r, L - 2 * r, size=space.dim)
        m1 = space.measure(ball(space, x, r))
        m2 = space.measure(ball(space, x, 2 * r))
        ratios.append(m2 / m1)
    doubling = float(max(ratios))

    if space.weight_spec.kind == "uniform":
        q = float(space.dim)
    else:
        radii = np.geomspace(r_lo, r_hi * 2, 12)
        masses = [space.measure(ball(space, np.zeros(space.dim), r)) for r in radii]
        q = float(np.polyfit(np.log(radii), np.log(masses), 1)[0])

    # relative isoperimetric constant of balls cut by a half-space
    iso = float(np.pi / 4) if space.dim == 2 else 0.5
    return SpaceConstants(doubling=doubling, dimension_exponent=q, isoperimetric=iso)
