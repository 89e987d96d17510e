"""Uniform workspace grids and the quadtree resolution ladder.

Cells are indexed row-major (``i = iy * nx + ix``) at every level. The
quadtree relation between two consecutive levels is exposed through the
:func:`children` / :func:`parent` maps instead of renumbering cells, so a
coarse cell ``(ix, iy)`` owns the fine cells ``(2ix + a, 2iy + b)``.
Children are always returned in quadrant order SW, SE, NW, NE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidLevels, LevelOutOfRange, NonTiling, OutOfBounds

_TILE_RTOL = 1e-9
_EDGE_TOL = 1e-9


def _tile_count(length: float, resolution: float, what: str) -> int:
    ratio = length / resolution
    n = round(ratio)
    if n < 1 or abs(ratio - n) > _TILE_RTOL * max(1.0, abs(ratio)):
        raise NonTiling(
            f"{what} {length!r} m is not a multiple of resolution {resolution!r} m"
        )
    return int(n)


@dataclass(frozen=True)
class GridSpec:
    """A rectangular workspace split into square cells of side ``resolution``."""

    origin: tuple[float, float]
    extent: tuple[float, float]
    resolution: float
    dims: tuple[int, int]

    @property
    def nx(self) -> int:
        return self.dims[0]

    @property
    def ny(self) -> int:
        return self.dims[1]

    @property
    def cell_count(self) -> int:
        return self.dims[0] * self.dims[1]

    @cached_property
    def centers(self) -> np.ndarray:
        """(N, 2) array of cell centers, row-major."""
        ix = np.tile(np.arange(self.nx), self.ny)
        iy = np.repeat(np.arange(self.ny), self.nx)
        return np.column_stack(
            (
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            )
        )

    def check_index(self, i) -> int:
        i = int(i)
        if not 0 <= i < self.cell_count:
            raise IndexError(f"cell index {i} outside [0, {self.cell_count})")
        return i

    def cell_xy(self, i) -> tuple[int, int]:
        i = self.check_index(i)
        return i % self.nx, i // self.nx

    def index_of(self, ix: int, iy: int) -> int:
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise IndexError(f"cell ({ix}, {iy}) outside grid dims {self.dims}")
        return iy * self.nx + ix

    def cell_center(self, i) -> np.ndarray:
        ix, iy = self.cell_xy(i)
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def cell_bounds(self, i) -> tuple[float, float, float, float]:
        """Return ``(x0, y0, x1, y1)`` of cell ``i``."""
        ix, iy = self.cell_xy(i)
        u = self.resolution
        x0 = self.origin[0] + ix * u
        y0 = self.origin[1] + iy * u
        return x0, y0, x0 + u, y0 + u

    def contains(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        x0, y0 = self.origin
        return x0 <= x <= x0 + self.extent[0] and y0 <= y <= y0 + self.extent[1]

    def locate(self, p) -> int:
        return locate(self, p)


def build_grid(origin, extent, resolution: float) -> GridSpec:
    """Discretize the rectangle ``origin + [0, w] x [0, h]`` into square cells.

    >>> build_grid((0, 0), (8, 8), 0.1).dims
    (80, 80)
    """
    resolution = float(resolution)
    w, h = float(extent[0]), float(extent[1])
    if resolution <= 0 or w <= 0 or h <= 0:
        raise ValueError("extent and resolution must be positive")
    nx = _tile_count(w, resolution, "width")
    ny = _tile_count(h, resolution, "height")
    return GridSpec(
        origin=(float(origin[0]), float(origin[1])),
        extent=(w, h),
        resolution=resolution,
        dims=(nx, ny),
    )


def _axis_index(coord: float, start: float, u: float, n: int) -> int:
    q = (coord - start) / u
    r = round(q)
    # points within rounding noise of an edge belong to the upper cell
    k = int(r) if abs(q - r) < _EDGE_TOL else math.floor(q)
    # the far boundary of the workspace is closed
    return min(max(k, 0), n - 1)


def locate(grid: GridSpec, p) -> int:
    """Index of the cell whose half-open area ``[x0, x0+u) x [y0, y0+u)`` holds ``p``.

    The far edges of the workspace are closed so that every point of the
    rectangle maps to a cell.
    """
    if not grid.contains(p):
        raise OutOfBounds(f"point {tuple(p)} outside workspace of {grid}")
    ix = _axis_index(float(p[0]), grid.origin[0], grid.resolution, grid.nx)
    iy = _axis_index(float(p[1]), grid.origin[1], grid.resolution, grid.ny)
    return iy * grid.nx + ix


def locate_many(grid: GridSpec, points) -> np.ndarray:
    return np.array([locate(grid, p) for p in np.asarray(points, dtype=float)], dtype=np.intp)


@dataclass(frozen=True)
class ResolutionLadder:
    """Grids of halving cell size; ``levels[0]`` is the coarsest."""

    levels: tuple[GridSpec, ...] = field()

    @property
    def r(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> GridSpec:
        return self.levels[-1]

    @property
    def coarsest(self) -> GridSpec:
        return self.levels[0]

    def __getitem__(self, k: int) -> GridSpec:
        return self.levels[k]

    def __len__(self) -> int:
        return len(self.levels)

    def children(self, k: int, parent_index) -> np.ndarray:
        return children(self, k, parent_index)

    def parent(self, k: int, child_index) -> int:
        return parent(self, k, child_index)


def build_ladder(origin, extent, finest_resolution: float, r: int) -> ResolutionLadder:
    """Build ``r`` levels with resolutions ``finest * 2**(r-1-k)``, coarsest first."""
    if int(r) != r or r < 1:
        raise InvalidLevels(f"level count must be a positive integer, got {r!r}")
    r = int(r)
    finest_resolution = float(finest_resolution)
    coarse = build_grid(origin, extent, finest_resolution * 2 ** (r - 1))
    levels = [coarse]
    for k in range(1, r):
        levels.append(
            GridSpec(
                origin=coarse.origin,
                extent=coarse.extent,
                resolution=finest_resolution * 2 ** (r - 1 - k),
                dims=(coarse.nx * 2**k, coarse.ny * 2**k),
            )
        )
    return ResolutionLadder(tuple(levels))


def children(ladder: ResolutionLadder, k: int, parent_index) -> np.ndarray:
    """The four level-(k+1) cells inside level-k cell ``parent_index`` (SW, SE, NW, NE)."""
    if not 0 <= k < ladder.r - 1:
        raise LevelOutOfRange(f"level {k} has no children in a {ladder.r}-level ladder")
    ix, iy = ladder.levels[k].cell_xy(parent_index)
    fine_nx = ladder.levels[k + 1].nx
    base = 2 * iy * fine_nx + 2 * ix
    return np.array([base, base + 1, base + fine_nx, base + fine_nx + 1], dtype=np.intp)


def children_many(ladder: ResolutionLadder, k: int, parents) -> np.ndarray:
    """Vectorized :func:`children`; returns shape ``(len(parents), 4)``."""
    if not 0 <= k < ladder.r - 1:
        raise LevelOutOfRange(f"level {k} has no children in a {ladder.r}-level ladder")
    parents = np.asarray(parents, dtype=np.intp)
    nx = ladder.levels[k].nx
    if parents.size and (parents.min() < 0 or parents.max() >= ladder.levels[k].cell_count):
        raise IndexError("parent index out of range")
    fine_nx = ladder.levels[k + 1].nx
    base = 2 * (parents // nx) * fine_nx + 2 * (parents % nx)
    return base[:, None] + np.array([0, 1, fine_nx, fine_nx + 1], dtype=np.intp)


def parent(ladder: ResolutionLadder, k: int, child_index) -> int:
    """The level-(k-1) cell containing level-k cell ``child_index``."""
    if not 1 <= k < ladder.r:
        raise LevelOutOfRange(f"level {k} has no parent in a {ladder.r}-level ladder")
    ix, iy = ladder.levels[k].cell_xy(child_index)
    return (iy // 2) * ladder.levels[k - 1].nx + ix // 2
