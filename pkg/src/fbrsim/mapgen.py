"""Procedural indoor maps: ring, office, campus.

All generators produce a closed world whose free space is a single connected
component; generation is deterministic in (style, size_m2, room_count, seed).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ._kernels import OCC_FREE, OCC_WALL
from .gridworld import OccupancyGrid

STYLES = ("ring", "office", "campus")

_CORRIDOR_M = 2.0
_DOOR_M = 1.0
_MIN_ROOM_M = 1.6
_ROOM_DEPTH_M = 8.0


class MapGenError(RuntimeError):
    """Requested map cannot be generated (rooms do not fit, disconnected, ...)."""


def _carve(cells: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> None:
    cells[y0 : y1 + 1, x0 : x1 + 1] = OCC_FREE


def _split_spans(total: int, parts: int, min_span: int, wall: int = 1) -> list[tuple[int, int]]:
    """Split `total` cells into `parts` spans separated by `wall` cells."""
    usable = total - wall * (parts - 1)
    if parts < 1 or usable < parts * min_span:
        raise MapGenError(f"cannot fit {parts} rooms into {total} cells")
    base = usable // parts
    extra = usable % parts
    spans = []
    start = 0
    for i in range(parts):
        length = base + (1 if i < extra else 0)
        spans.append((start, start + length - 1))
        start += length + wall
    return spans


def _door_on_span(rng: np.random.Generator, lo: int, hi: int, width: int) -> tuple[int, int]:
    width = min(width, hi - lo + 1)
    start = int(rng.integers(lo, hi - width + 2))
    return start, start + width - 1


def _baffle(cells: np.ndarray, x0: int, y0: int, x1: int, y1: int,
            door_side: str, rng: np.random.Generator, min_gap: int) -> None:
    """Partition wall inside a room, parallel to its door wall, leaving a gap
    at one end; rooms become U-shaped so covering them takes real travel."""
    w_span = x1 - x0 + 1
    h_span = y1 - y0 + 1
    if door_side in ("n", "s"):
        if h_span < 3 * min_gap or w_span < 2 * min_gap + 1:
            return
        yb = y0 + h_span // 2
        gap_left = bool(rng.integers(0, 2))
        if gap_left:
            cells[yb, x0 + min_gap : x1 + 1] = OCC_WALL
        else:
            cells[yb, x0 : x1 + 1 - min_gap] = OCC_WALL
    else:
        if w_span < 3 * min_gap or h_span < 2 * min_gap + 1:
            return
        xb = x0 + w_span // 2
        gap_top = bool(rng.integers(0, 2))
        if gap_top:
            cells[y0 + min_gap : y1 + 1, xb] = OCC_WALL
        else:
            cells[y0 : y1 + 1 - min_gap, xb] = OCC_WALL

def _carve_ring(cells: np.ndarray, rooms: int, rng: np.random.Generator, res: float) -> None:
    h, w = cells.shape
    cw = max(int(round(_CORRIDOR_M / res)), 3)
    door = max(int(round(_DOOR_M / res)), 2)
    min_room = max(int(round(_MIN_ROOM_M / res)), 3)
    depth = min(int(round(_ROOM_DEPTH_M / res)), (min(w, h) - 2 * cw - 8) // 3)
    if depth < min_room:
        raise MapGenError("map too small for a ring layout")
    b = 1  # border wall
    # Room band: [b+0 .. b+depth-1] from each edge; 1-cell wall; then corridor ring.
    c0 = b + depth + 1
    c1 = c0 + cw - 1
    if 2 * (c1 + 2) >= min(w, h):
        raise MapGenError("map too small for a ring layout")
    # Corridor ring (a frame of width cw).
    _carve(cells, c0, c0, w - 1 - c0, c1)  # top band
    _carve(cells, c0, h - 1 - c1, w - 1 - c0, h - 1 - c0)  # bottom band
    _carve(cells, c0, c0, c1, h - 1 - c0)  # left band
    _carve(cells, w - 1 - c1, c0, w - 1 - c0, h - 1 - c0)  # right band
    if rooms == 0:
        return
    # Central hub joined to the ring by spoke corridors: gives the loop route
    # choices and a natural high-traffic crossing.
    hub = min(int(round(7.0 / res)), max(w, h) // 5)
    hx0 = (w - hub) // 2
    hy0 = (h - hub) // 2
    if hx0 > c1 + 2 and hy0 > c1 + 2:
        _carve(cells, hx0, hy0, hx0 + hub - 1, hy0 + hub - 1)
        sx0 = (w - cw) // 2
        sy0 = (h - cw) // 2
        _carve(cells, sx0, c1 + 1, sx0 + cw - 1, hy0 - 1)  # north spoke
        _carve(cells, sx0, hy0 + hub, sx0 + cw - 1, h - 1 - c1 - 1)  # south spoke
        _carve(cells, c1 + 1, sy0, hx0 - 1, sy0 + cw - 1)  # west spoke
        _carve(cells, hx0 + hub, sy0, w - 1 - c1 - 1, sy0 + cw - 1)  # east spoke
    # Distribute rooms over the four outer sides, round-robin.
    per_side = [rooms // 4] * 4
    for i in range(rooms % 4):
        per_side[i] += 1
    span_lo = c0
    span_hi_x = w - 1 - c0
    span_hi_y = h - 1 - c0
    for side, count in enumerate(per_side):
        if count == 0:
            continue
        total = (span_hi_x if side in (0, 1) else span_hi_y) - span_lo + 1
        spans = _split_spans(total, count, min_room)
        for lo, hi in spans:
            lo += span_lo
            hi += span_lo
            if side == 0:  # top rooms: y in [b, b+depth-1], door on the south wall
                _carve(cells, lo, b, hi, b + depth - 1)
                dx0, dx1 = _door_on_span(rng, lo, hi, door)
                _carve(cells, dx0, b + depth, dx1, c0 - 1)
                _baffle(cells, lo, b, hi, b + depth - 1, "s", rng, door)
            elif side == 1:  # bottom
                _carve(cells, lo, h - 1 - (b + depth - 1), hi, h - 1 - b)
                dx0, dx1 = _door_on_span(rng, lo, hi, door)
                _carve(cells, dx0, h - 1 - (c0 - 1), dx1, h - 1 - (b + depth))
                _baffle(cells, lo, h - 1 - (b + depth - 1), hi, h - 1 - b, "n", rng, door)
            elif side == 2:  # left
                _carve(cells, b, lo, b + depth - 1, hi)
                dy0, dy1 = _door_on_span(rng, lo, hi, door)
                _carve(cells, b + depth, dy0, c0 - 1, dy1)
                _baffle(cells, b, lo, b + depth - 1, hi, "e", rng, door)
            else:  # right
                _carve(cells, w - 1 - (b + depth - 1), lo, w - 1 - b, hi)
                dy0, dy1 = _door_on_span(rng, lo, hi, door)
                _carve(cells, w - 1 - (c0 - 1), dy0, w - 1 - (b + depth), dy1)
                _baffle(cells, w - 1 - (b + depth - 1), lo, w - 1 - b, hi, "w", rng, door)


def _carve_office(
    cells: np.ndarray, rooms: int, rng: np.random.Generator, res: float,
    x_off: int = 0, y_off: int = 0, w: int | None = None, h: int | None = None,
) -> int:
    """Comb layout: horizontal corridors with a room row under each, plus one
    vertical spine connecting them. Returns the spine's absolute x column."""
    if w is None:
        w = cells.shape[1] - x_off
    if h is None:
        h = cells.shape[0] - y_off
    cw = max(int(round(_CORRIDOR_M / res)), 3)
    door = max(int(round(_DOOR_M / res)), 2)
    min_room = max(int(round(_MIN_ROOM_M / res)), 3)
    b = 1
    inner_w = w - 2 * b
    inner_h = h - 2 * b
    sx0 = x_off + b + (inner_w - cw) // 2
    sx1 = sx0 + cw - 1
    if inner_w < 3 * cw or inner_h < cw + 2:
        raise MapGenError("map too small for an office layout")

    if rooms == 0:
        y0 = y_off + b + (inner_h - cw) // 2
        _carve(cells, x_off + b, y0, x_off + b + inner_w - 1, y0 + cw - 1)
        _carve(cells, sx0, y_off + b, sx1, y_off + b + inner_h - 1)
        return sx0

    # Sections of a row usable for rooms (left and right of the spine, with a
    # one-cell wall against it).
    sections = []
    if sx0 - 1 - (x_off + b) >= min_room:
        sections.append((x_off + b, sx0 - 2))
    if (x_off + b + inner_w - 1) - (sx1 + 2) + 1 >= min_room:
        sections.append((sx1 + 2, x_off + b + inner_w - 1))
    if not sections:
        raise MapGenError("office layout has no width for rooms beside the spine")
    row_capacity = sum((hi - lo + 2) // (min_room + 1) for lo, hi in sections)

    room_h_pref = int(round(5.0 / res))
    plan = None
    for room_h in range(min(room_h_pref, inner_h - cw - 2), min_room - 1, -1):
        pitch = cw + 1 + room_h + 1
        n_rows = (inner_h + 1) // pitch
        if n_rows < 1:
            continue
        if n_rows * row_capacity >= rooms:
            plan = (room_h, pitch, n_rows)
            break
    if plan is None:
        raise MapGenError(f"cannot fit {rooms} rooms into an office layout this size")
    room_h, pitch, n_rows = plan

    placed = 0
    per_row = [rooms // n_rows] * n_rows
    for i in range(rooms % n_rows):
        per_row[i] += 1
    y = y_off + b
    for row in range(n_rows):
        _carve(cells, x_off + b, y, x_off + b + inner_w - 1, y + cw - 1)
        want = per_row[row]
        y_rooms0 = y + cw + 1
        y_rooms1 = y_rooms0 + room_h - 1
        if y_rooms1 > y_off + b + inner_h - 1:
            raise MapGenError("office rooms do not fit vertically")
        # Split this row's rooms across the sections: proportional to width,
        # clamped to capacity, leftovers filled greedily.
        caps = [(hi - lo + 2) // (min_room + 1) for lo, hi in sections]
        total_w = sum(hi - lo + 1 for lo, hi in sections)
        counts = []
        remaining = want
        for k, (lo, hi) in enumerate(sections):
            share = int(round(want * (hi - lo + 1) / total_w))
            share = min(share, caps[k], remaining)
            counts.append(share)
            remaining -= share
        for k in range(len(sections)):
            if remaining <= 0:
                break
            extra = min(caps[k] - counts[k], remaining)
            counts[k] += extra
            remaining -= extra
        if remaining > 0:
            raise MapGenError("office row cannot hold its share of rooms")
        for (lo, hi), count in zip(sections, counts):
            if count <= 0:
                continue
            spans = _split_spans(hi - lo + 1, count, min_room)
            for s_lo, s_hi in spans:
                rx0 = lo + s_lo
                rx1 = lo + s_hi
                _carve(cells, rx0, y_rooms0, rx1, y_rooms1)
                dx0, dx1 = _door_on_span(rng, rx0, rx1, door)
                _carve(cells, dx0, y + cw, dx1, y_rooms0 - 1)
                placed += 1
        y += pitch
    _carve(cells, sx0, y_off + b, sx1, min(y - 1, y_off + b + inner_h - 1))
    if placed < rooms:
        raise MapGenError(f"placed only {placed} of {rooms} office rooms")
    return sx0


def _connectivity_ok(cells: np.ndarray) -> bool:
    free = cells == OCC_FREE
    if not free.any():
        return False
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    _, n = ndimage.label(free, structure=structure)
    return n == 1


def generate_map(style: str, size_m2: float, room_count: int, seed: int, resolution: float = 0.1) -> OccupancyGrid:
    """Generate a connected indoor map of roughly size_m2 square meters."""
    if style not in STYLES:
        raise MapGenError(f"unknown style {style!r}; expected one of {STYLES}")
    if size_m2 <= 16.0:
        raise MapGenError("size_m2 must exceed 16 square meters")
    if room_count < 0:
        raise MapGenError("room_count must be >= 0")
    rng = np.random.default_rng(seed)
    side = math.sqrt(size_m2)
    n = int(round(side / resolution))
    cells = np.full((n, n), OCC_WALL, dtype=np.uint8)
    if style == "ring":
        _carve_ring(cells, room_count, rng, resolution)
    elif style == "office":
        _carve_office(cells, room_count, rng, resolution)
    else:  # campus: two office blocks joined by a corridor
        half = (n - 3) // 2
        left = _carve_office(cells, room_count // 2, rng, resolution, 0, 0, half, n)
        right = _carve_office(
            cells, room_count - room_count // 2, rng, resolution, n - half, 0, half, n
        )
        cw = max(int(round(_CORRIDOR_M / resolution)), 3)
        mid = n // 2
        _carve(cells, left, mid - cw // 2, right + cw - 1, mid + cw // 2)
    cells[0, :] = OCC_WALL
    cells[-1, :] = OCC_WALL
    cells[:, 0] = OCC_WALL
    cells[:, -1] = OCC_WALL
    if not _connectivity_ok(cells):
        raise MapGenError(f"generated {style} map free space is not connected")
    return OccupancyGrid(resolution=resolution, cells=cells)
