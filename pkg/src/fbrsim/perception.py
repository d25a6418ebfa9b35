"""Simulated lidar sensing and per-robot incremental map building."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import FREE, OBSTACLE, UNKNOWN, mark_beam, ray_march, sweep_scan
from .gridworld import Cell, OccupancyGrid, OutOfBoundsError, Pose, raycast


@dataclass
class KnownMap:
    """Tri-state belief map sharing the world grid's frame and dimensions."""

    resolution: float
    cells: np.ndarray  # uint8 (height, width): UNKNOWN / FREE / OBSTACLE
    version: int = 0  # bumped on every mutation; cheap cache key

    @classmethod
    def blank(cls, grid: OccupancyGrid) -> "KnownMap":
        return cls(grid.resolution, np.zeros((grid.height, grid.width), dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def known_mask(self) -> np.ndarray:
        return self.cells != UNKNOWN

    def known_cell_count(self) -> int:
        return int(np.count_nonzero(self.cells != UNKNOWN))

    def is_free(self, cell: Cell) -> bool:
        return self.cells[cell[1], cell[0]] == FREE

    def cell_of(self, x: float, y: float) -> Cell:
        cx = min(max(int(math.floor(x / self.resolution)), 0), self.width - 1)
        cy = min(max(int(math.floor(y / self.resolution)), 0), self.height - 1)
        return (cx, cy)

    def copy(self) -> "KnownMap":
        return KnownMap(self.resolution, self.cells.copy(), self.version)

    def to_text(self) -> str:
        """Debug dump: ' ' unknown, '.' free, '#' obstacle."""
        alphabet = {UNKNOWN: " ", FREE: ".", OBSTACLE: "#"}
        return "\n".join("".join(alphabet[v] for v in row) for row in self.cells)


@dataclass(frozen=True)
class Beam:
    angle: float
    hit_range: float
    hit: bool
    hit_cell: Cell | None = None


@dataclass(frozen=True)
class LidarScan:
    origin: Pose
    beams: tuple[Beam, ...]


def simulate_lidar(
    grid: OccupancyGrid,
    pose: Pose,
    max_range: float,
    n_beams: int,
    rng: np.random.Generator | None = None,
    noise_std: float = 0.0,
) -> LidarScan:
    """One raycast per beam at angles 2*pi*j/n_beams.

    Optional Gaussian range noise (off by default; when enabled the per-beam
    hit cell is dropped since the reported range no longer matches geometry).
    """
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    cell = grid.cell_of(pose.x, pose.y)
    if grid.is_wall(cell):
        raise ValueError("lidar pose is inside an obstacle cell")
    beams = []
    for j in range(n_beams):
        angle = 2.0 * math.pi * j / n_beams
        hit = raycast(grid, pose, angle, max_range)
        if noise_std > 0.0 and rng is not None:
            r = float(min(max(hit.hit_range + rng.normal(0.0, noise_std), 0.0), max_range))
            beams.append(Beam(angle, r, hit.hit, None))
        else:
            beams.append(Beam(angle, hit.hit_range, hit.hit, hit.cell))
    return LidarScan(pose, tuple(beams))


def integrate_scan(known: KnownMap, scan: LidarScan) -> KnownMap:
    """Write a scan into the map in place (and return it).

    Per beam, cells entered strictly before hit_range become Free and the
    struck cell becomes Obstacle; known cells are never demoted to Unknown.
    """
    if not (0.0 <= scan.origin.x <= known.width * known.resolution and 0.0 <= scan.origin.y <= known.height * known.resolution):
        raise OutOfBoundsError("scan origin outside map bounds")
    changed = 0
    for beam in scan.beams:
        if beam.hit and beam.hit_cell is None:
            # Noisy beam: place the obstacle at the reported range endpoint.
            ex = scan.origin.x + math.cos(beam.angle) * beam.hit_range
            ey = scan.origin.y + math.sin(beam.angle) * beam.hit_range
            hit_cx, hit_cy = known.cell_of(ex, ey)
        elif beam.hit:
            hit_cx, hit_cy = beam.hit_cell
        else:
            hit_cx, hit_cy = -1, -1
        changed += mark_beam(
            known.cells,
            scan.origin.x,
            scan.origin.y,
            math.cos(beam.angle),
            math.sin(beam.angle),
            beam.hit_range,
            beam.hit,
            hit_cx,
            hit_cy,
            known.resolution,
        )
    if changed:
        known.version += 1
    return known


def sweep_and_integrate(grid: OccupancyGrid, known: KnownMap, pose: Pose, max_range: float, n_beams: int) -> bool:
    """Fused simulate_lidar + integrate_scan (identical result, one traversal).

    Returns True when the map gained information.
    """
    cell = grid.cell_of(pose.x, pose.y)
    if grid.is_wall(cell):
        raise ValueError("lidar pose is inside an obstacle cell")
    _, _, changed = sweep_scan(
        grid.cells, known.cells, pose.x, pose.y, n_beams, max_range, grid.resolution
    )
    if changed:
        known.version += 1
    return bool(changed)


def merge_maps(maps: "list[KnownMap]") -> KnownMap:
    """Cell-wise knowledge join: Unknown < Free < Obstacle."""
    if not maps:
        raise ValueError("merge_maps needs at least one map")
    shape = maps[0].cells.shape
    res = maps[0].resolution
    for m in maps[1:]:
        if m.cells.shape != shape or m.resolution != res:
            raise ValueError("merge_maps: dimension or resolution mismatch")
    merged = maps[0].cells.copy()
    for m in maps[1:]:
        np.maximum(merged, m.cells, out=merged)
    return KnownMap(res, merged)
