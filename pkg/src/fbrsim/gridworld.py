"""Ground-truth occupancy grids, geometry queries, and grid path planning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import (
    FREE,
    OCC_FREE,
    OCC_WALL,
    grid_dijkstra,
    ray_march,
    segment_clear,
)

Cell = tuple[int, int]  # (cx, cy) column/row indices

SQRT2 = math.sqrt(2.0)


class MapParseError(ValueError):
    """Malformed ASCII map file."""


class OutOfBoundsError(ValueError):
    """A pose fell outside the grid."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class RayHit:
    hit_range: float
    hit: bool
    cell: Cell | None = None


@dataclass(frozen=True)
class GridPath:
    waypoints: tuple[Cell, ...]
    length: float


@dataclass
class OccupancyGrid:
    """Immutable ground-truth world: wall/free cells at a fixed resolution."""

    resolution: float
    cells: np.ndarray  # uint8 (height, width), OCC_FREE / OCC_WALL

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.cells.ndim != 2 or self.cells.shape[0] < 1 or self.cells.shape[1] < 1:
            raise ValueError("grid must be at least 1x1")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        self.cells.setflags(write=False)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width_m(self) -> float:
        return self.width * self.resolution

    @property
    def height_m(self) -> float:
        return self.height * self.resolution

    def in_bounds_xy(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m

    def cell_of(self, x: float, y: float) -> Cell:
        cx = min(max(int(math.floor(x / self.resolution)), 0), self.width - 1)
        cy = min(max(int(math.floor(y / self.resolution)), 0), self.height - 1)
        return (cx, cy)

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.resolution, (cell[1] + 0.5) * self.resolution)

    def is_wall(self, cell: Cell) -> bool:
        return self.cells[cell[1], cell[0]] == OCC_WALL

    def is_free(self, cell: Cell) -> bool:
        return self.cells[cell[1], cell[0]] == OCC_FREE

    def free_cell_array(self) -> np.ndarray:
        """(n, 2) array of free cells as (cy, cx) rows, in raster order."""
        return np.argwhere(self.cells == OCC_FREE)

    def to_text(self) -> str:
        rows = ["".join("#" if v == OCC_WALL else "." for v in row) for row in self.cells]
        return f"resolution {self.resolution}\n" + "\n".join(rows) + "\n"


def load_map(text: str, force_border: bool = True) -> OccupancyGrid:
    """Parse an ASCII map: `resolution <m>` header, then rows of '#' and '.'.

    With force_border (the default) the outer boundary is overwritten with
    walls so the world is closed.
    """
    lines = text.splitlines()
    if not lines:
        raise MapParseError("empty map file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "resolution":
        raise MapParseError("line 1: expected header 'resolution <meters-per-cell>'")
    try:
        resolution = float(header[1])
    except ValueError:
        raise MapParseError(f"line 1: bad resolution value {header[1]!r}") from None
    if resolution <= 0:
        raise MapParseError("line 1: resolution must be > 0")

    body = [ln for ln in lines[1:]]
    while body and body[-1] == "":
        body.pop()
    if not body:
        raise MapParseError("line 2: map body is empty")
    width = len(body[0])
    rows = []
    for i, ln in enumerate(body, start=2):
        if len(ln) != width:
            raise MapParseError(f"ragged row at line {i}")
        row = np.empty(width, dtype=np.uint8)
        for j, ch in enumerate(ln):
            if ch == "#":
                row[j] = OCC_WALL
            elif ch == ".":
                row[j] = OCC_FREE
            else:
                raise MapParseError(f"line {i}: illegal character {ch!r}")
        rows.append(row)
    cells = np.vstack(rows)
    if force_border:
        cells[0, :] = OCC_WALL
        cells[-1, :] = OCC_WALL
        cells[:, 0] = OCC_WALL
        cells[:, -1] = OCC_WALL
    return OccupancyGrid(resolution=resolution, cells=cells)


def _require_in_bounds(grid: OccupancyGrid, pose: Pose, name: str) -> None:
    if not grid.in_bounds_xy(pose.x, pose.y):
        raise OutOfBoundsError(f"{name} pose ({pose.x}, {pose.y}) outside grid bounds")


def line_of_sight(grid: OccupancyGrid, a: Pose, b: Pose) -> bool:
    """True iff the segment a-b touches no wall cell (supercover traversal)."""
    _require_in_bounds(grid, a, "first")
    _require_in_bounds(grid, b, "second")
    return bool(segment_clear(grid.cells, a.x, a.y, b.x, b.y, grid.resolution))


def raycast(grid: OccupancyGrid, origin: Pose, angle: float, max_range: float) -> RayHit:
    """Distance to the first wall-cell boundary along the ray, capped at max_range."""
    _require_in_bounds(grid, origin, "origin")
    if max_range <= 0:
        raise ValueError("max_range must be > 0")
    t, hit, cx, cy = ray_march(
        grid.cells, origin.x, origin.y, math.cos(angle), math.sin(angle), max_range, grid.resolution
    )
    return RayHit(float(t), bool(hit), (int(cx), int(cy)) if hit else None)


def path_length(n_axis: int, n_diag: int, resolution: float) -> float:
    """Length of a grid path from its step counts (shared so lengths compare exactly)."""
    return n_axis * resolution + n_diag * (resolution * SQRT2)


def path_from_pred(pred: np.ndarray, start: Cell, goal: Cell, resolution: float) -> GridPath | None:
    """Rebuild the path into `goal` from a predecessor array; None if unreached."""
    w = pred.shape[1]
    gx, gy = goal
    if (gx, gy) != start and pred[gy, gx] < 0:
        return None
    cells = [goal]
    cx, cy = goal
    while (cx, cy) != start:
        node = pred[cy, cx]
        cx, cy = int(node % w), int(node // w)
        cells.append((cx, cy))
    cells.reverse()
    n_diag = 0
    n_axis = 0
    for (x0, y0), (x1, y1) in zip(cells, cells[1:]):
        if x0 != x1 and y0 != y1:
            n_diag += 1
        else:
            n_axis += 1
    return GridPath(tuple(cells), path_length(n_axis, n_diag, resolution))


_NO_TARGETS = np.empty(0, dtype=np.int64)


def distance_field(known, source: Cell, targets: np.ndarray | None = None):
    """Shortest-path field over the known map's free cells from `source`.

    With a flat-index target array the search stops once all reachable targets
    are settled. Returns (dist, pred, n_axis, n_diag).
    """
    passable = known.cells == FREE
    if targets is None:
        targets = _NO_TARGETS
    return grid_dijkstra(passable, source[0], source[1], known.resolution, targets)


def plan_path(known, start: Cell, goal: Cell) -> GridPath | None:
    """Optimal 8-connected path over cells known Free; None when unreachable.

    Unknown and obstacle cells are untraversable; a diagonal step is rejected
    when both of its orthogonal neighbor cells are untraversable.
    """
    w, h = known.width, known.height
    sx, sy = start
    gx, gy = goal
    if not (0 <= sx < w and 0 <= sy < h and 0 <= gx < w and 0 <= gy < h):
        raise OutOfBoundsError("path endpoints must lie inside the grid")
    if known.cells[sy, sx] != FREE:
        raise ValueError("path start cell is not known Free")
    if known.cells[gy, gx] != FREE:
        return None
    if start == goal:
        return GridPath((start,), 0.0)
    passable = known.cells == FREE
    targets = np.array([gy * w + gx], dtype=np.int64)
    _, pred, _, _ = grid_dijkstra(passable, sx, sy, known.resolution, targets)
    return path_from_pred(pred, start, goal, known.resolution)
