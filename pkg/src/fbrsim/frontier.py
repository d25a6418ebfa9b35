"""Frontier extraction, scoring, and exploration target selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._kernels import FREE, UNKNOWN
from .gridworld import Cell, GridPath, distance_field, path_from_pred, path_length
from .perception import KnownMap

REAL = "real"
VIRTUAL = "virtual"

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Frontier:
    id: int
    kind: str
    cells: tuple[Cell, ...]  # raster-sorted (cy, cx) order
    target: Cell
    length_m: float

    @property
    def n_cells(self) -> int:
        return len(self.cells)


@dataclass
class FrontierSet:
    real: list[Frontier] = field(default_factory=list)
    virtual: list[Frontier] = field(default_factory=list)

    def all(self) -> list[Frontier]:
        return list(self.real) + list(self.virtual)


def adjacency_mask(mask: np.ndarray) -> np.ndarray:
    """Cells with at least one true 8-neighbor in `mask` (border-safe shifts)."""
    adj = np.zeros_like(mask)
    adj[1:, :] |= mask[:-1, :]
    adj[:-1, :] |= mask[1:, :]
    adj[:, 1:] |= mask[:, :-1]
    adj[:, :-1] |= mask[:, 1:]
    adj[1:, 1:] |= mask[:-1, :-1]
    adj[1:, :-1] |= mask[:-1, 1:]
    adj[:-1, 1:] |= mask[1:, :-1]
    adj[:-1, :-1] |= mask[1:, 1:]
    return adj


def frontier_cell_mask(known: KnownMap) -> np.ndarray:
    """Free cells 8-adjacent to at least one Unknown cell."""
    return (known.cells == FREE) & adjacency_mask(known.cells == UNKNOWN)


def snap_target(xs: np.ndarray, ys: np.ndarray) -> Cell:
    """Centroid cell of a component, snapped to the nearest member when needed.

    Ties on the snap distance break toward the raster-smallest member cell.
    """
    fx = float(xs.mean())
    fy = float(ys.mean())
    ccx = int(np.floor(fx + 0.5))
    ccy = int(np.floor(fy + 0.5))
    member = (xs == ccx) & (ys == ccy)
    if member.any():
        return (ccx, ccy)
    d2 = (xs - fx) ** 2 + (ys - fy) ** 2
    order = np.lexsort((xs, ys, d2))
    k = order[0]
    return (int(xs[k]), int(ys[k]))


def components_to_frontiers(
    mask: np.ndarray,
    kind: str,
    resolution: float,
    min_cells: int = 1,
    id_start: int = 0,
    id_iter=None,
) -> list[Frontier]:
    """Split a boolean cell mask into 8-connected components, one Frontier each.

    Components smaller than min_cells are dropped. Ids come from id_iter when
    given, else sequentially from id_start; component order is scipy's raster
    labeling order, so output is deterministic.
    """
    labels, n_lab = ndimage.label(mask, structure=_EIGHT)
    out = []
    next_id = id_start
    slices = ndimage.find_objects(labels)
    for lab in range(1, n_lab + 1):
        sl = slices[lab - 1]
        ys, xs = np.nonzero(labels[sl] == lab)
        if ys.size < min_cells:
            continue
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        cells = tuple((int(x), int(y)) for y, x in zip(ys.tolist(), xs.tolist()))
        target = snap_target(xs, ys)
        if id_iter is not None:
            fid = next(id_iter)
        else:
            fid = next_id
            next_id += 1
        out.append(Frontier(fid, kind, cells, target, len(cells) * resolution))
    return out


def extract_frontiers(known: KnownMap, min_cells: int, id_start: int = 0, id_iter=None) -> list[Frontier]:
    """Real frontiers of a known map: components of the frontier-cell mask."""
    if min_cells < 1:
        raise ValueError("min_cells must be >= 1")
    return components_to_frontiers(
        frontier_cell_mask(known), REAL, known.resolution, min_cells, id_start, id_iter
    )


def frontier_score(f: Frontier, dist_m: float, alpha: float) -> float:
    """alpha * length - (1 - alpha) * distance; bigger is more promising."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if dist_m < 0:
        raise ValueError("dist_m must be >= 0")
    return alpha * f.length_m - (1.0 - alpha) * dist_m


def select_frontier_with_path(
    fs: FrontierSet, robot_cell: Cell, known: KnownMap, alpha: float
) -> tuple[Frontier, GridPath] | None:
    """Best reachable frontier of F u F-bar plus its shortest path.

    Distance is the shortest-path length over known Free space; unreachable
    frontiers are discarded. Ties break on smaller distance, then smaller id.
    """
    if not known.is_free(robot_cell):
        raise ValueError("robot cell is not known Free")
    candidates = fs.all()
    if not candidates:
        return None
    w = known.width
    targets = np.array([f.target[1] * w + f.target[0] for f in candidates], dtype=np.int64)
    dist, pred, n_axis, n_diag = distance_field(known, robot_cell, targets)
    best = None
    for f in candidates:
        tx, ty = f.target
        if not math.isfinite(dist[ty, tx]):
            continue
        d = path_length(int(n_axis[ty, tx]), int(n_diag[ty, tx]), known.resolution)
        score = frontier_score(f, d, alpha)
        if best is None:
            best = (score, d, f.id, f)
            continue
        b_score, b_d, b_id = best[0], best[1], best[2]
        if score > b_score or (score == b_score and (d < b_d or (d == b_d and f.id < b_id))):
            best = (score, d, f.id, f)
    if best is None:
        return None
    winner = best[3]
    path = path_from_pred(pred, robot_cell, winner.target, known.resolution)
    return winner, path


def select_frontier(fs: FrontierSet, robot_cell: Cell, known: KnownMap, alpha: float) -> Frontier | None:
    sel = select_frontier_with_path(fs, robot_cell, known, alpha)
    return None if sel is None else sel[0]
