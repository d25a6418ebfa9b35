"""Numba-compiled inner loops: supercover grid traversal, lidar sweeps, Dijkstra.

Everything here operates on raw numpy arrays; the wrapper modules own the
typed API. Cell state constants are shared across the package.
"""

import math

import numpy as np
from numba import njit

# Ground-truth occupancy grid states.
OCC_FREE = 0
OCC_WALL = 1

# Known-map (belief) states. Ordered so that a cell-wise max is the
# knowledge join: UNKNOWN < FREE < OBSTACLE.
UNKNOWN = 0
FREE = 1
OBSTACLE = 2

# Two crossing times closer than this are treated as one corner crossing.
_TIE_EPS = 1e-12

_SQRT2 = math.sqrt(2.0)

# 8-connected neighborhood, axis moves first. Fixed order keeps tie-breaking
# deterministic in the planner.
_NBR_DX = np.array([1, -1, 0, 0, 1, 1, -1, -1], dtype=np.int64)
_NBR_DY = np.array([0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)


@njit(cache=True)
def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def trace_cells(ox, oy, dx, dy, t_end, res, w, h, cxs, cys, ts, grp):
    """Supercover traversal of the cells touched by p(t) = o + t*(dx,dy), t in [0, t_end].

    (dx, dy) must be unit length so t is in meters. Cells are written to the
    output arrays in entry order with their entry distance; cells sharing a
    `grp` value were reached at the same corner crossing (x-side cell, y-side
    cell, then the diagonal cell the ray continues through). Stops at the grid
    boundary. Returns the number of cells written.
    """
    cx = _clamp(int(math.floor(ox / res)), 0, w - 1)
    cy = _clamp(int(math.floor(oy / res)), 0, h - 1)
    n = 0
    g = 0
    cxs[n] = cx
    cys[n] = cy
    ts[n] = 0.0
    grp[n] = g
    n += 1

    step_x = 0
    step_y = 0
    t_max_x = math.inf
    t_max_y = math.inf
    t_delta_x = math.inf
    t_delta_y = math.inf
    if dx > 0.0:
        step_x = 1
        t_max_x = ((cx + 1) * res - ox) / dx
        t_delta_x = res / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (cx * res - ox) / dx
        t_delta_x = -res / dx
    if dy > 0.0:
        step_y = 1
        t_max_y = ((cy + 1) * res - oy) / dy
        t_delta_y = res / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (cy * res - oy) / dy
        t_delta_y = -res / dy

    cap = cxs.shape[0] - 4
    while n < cap:
        if t_max_x < t_max_y - _TIE_EPS:
            t = t_max_x
            if t > t_end:
                break
            cx += step_x
            if cx < 0 or cx >= w:
                break
            t_max_x += t_delta_x
            g += 1
            cxs[n] = cx
            cys[n] = cy
            ts[n] = t
            grp[n] = g
            n += 1
        elif t_max_y < t_max_x - _TIE_EPS:
            t = t_max_y
            if t > t_end:
                break
            cy += step_y
            if cy < 0 or cy >= h:
                break
            t_max_y += t_delta_y
            g += 1
            cxs[n] = cx
            cys[n] = cy
            ts[n] = t
            grp[n] = g
            n += 1
        else:
            # Corner crossing (or both infinite for a degenerate direction).
            t = min(t_max_x, t_max_y)
            if t > t_end:
                break
            g += 1
            sx = cx + step_x
            sy = cy + step_y
            if 0 <= sx < w:
                cxs[n] = sx
                cys[n] = cy
                ts[n] = t
                grp[n] = g
                n += 1
            if 0 <= sy < h:
                cxs[n] = cx
                cys[n] = sy
                ts[n] = t
                grp[n] = g
                n += 1
            cx = sx
            cy = sy
            if cx < 0 or cx >= w or cy < 0 or cy >= h:
                break
            t_max_x += t_delta_x
            t_max_y += t_delta_y
            cxs[n] = cx
            cys[n] = cy
            ts[n] = t
            grp[n] = g
            n += 1
    return n


@njit(cache=True)
def ray_march(occ, ox, oy, dx, dy, max_t, res):
    """First obstacle cell along a ray.

    Returns (hit_t, hit, cx, cy); (max_t, False, -1, -1) when the ray stays
    clear within max_t.
    """
    h, w = occ.shape
    m = 3 * (w + h) + 8
    cxs = np.empty(m, np.int64)
    cys = np.empty(m, np.int64)
    ts = np.empty(m, np.float64)
    grp = np.empty(m, np.int64)
    n = trace_cells(ox, oy, dx, dy, max_t, res, w, h, cxs, cys, ts, grp)
    for i in range(n):
        if occ[cys[i], cxs[i]] == OCC_WALL:
            return ts[i], True, cxs[i], cys[i]
    return max_t, False, np.int64(-1), np.int64(-1)


@njit(cache=True)
def segment_clear(occ, ax, ay, bx, by, res):
    """True iff no obstacle cell touches the closed segment a-b (supercover).

    The endpoint order is canonicalized first, so the result is exactly
    symmetric in (a, b).
    """
    if (bx < ax) or (bx == ax and by < ay):
        ax, bx = bx, ax
        ay, by = by, ay
    h, w = occ.shape
    ddx = bx - ax
    ddy = by - ay
    length = math.sqrt(ddx * ddx + ddy * ddy)
    if length == 0.0:
        cx = _clamp(int(math.floor(ax / res)), 0, w - 1)
        cy = _clamp(int(math.floor(ay / res)), 0, h - 1)
        return occ[cy, cx] != OCC_WALL
    hit_t, hit, _, _ = ray_march(occ, ax, ay, ddx / length, ddy / length, length, res)
    return not hit


@njit(cache=True)
def mark_beam(known, ox, oy, dx, dy, hit_range, hit, hit_cx, hit_cy, res):
    """Write one lidar beam into a known map. Returns the number of cells changed.

    Cells entered strictly before hit_range become FREE; the struck cell
    becomes OBSTACLE. Cells entered exactly at hit_range (corner ties with the
    hit) are left untouched, which keeps the map sound when the beam grazes a
    corner shared with the obstacle.
    """
    h, w = known.shape
    m = 3 * (w + h) + 8
    cxs = np.empty(m, np.int64)
    cys = np.empty(m, np.int64)
    ts = np.empty(m, np.float64)
    grp = np.empty(m, np.int64)
    n = trace_cells(ox, oy, dx, dy, hit_range, res, w, h, cxs, cys, ts, grp)
    changed = 0
    for i in range(n):
        if ts[i] < hit_range:
            if known[cys[i], cxs[i]] == UNKNOWN:
                known[cys[i], cxs[i]] = FREE
                changed += 1
    if hit and hit_cx >= 0:
        if known[hit_cy, hit_cx] != OBSTACLE:
            known[hit_cy, hit_cx] = OBSTACLE
            changed += 1
    return changed


@njit(cache=True)
def sweep_scan(occ, known, ox, oy, n_beams, max_range, res):
    """Simulate a full lidar sweep and integrate it into `known` in place.

    Equivalent to a per-beam ray_march followed by mark_beam, fused to avoid
    tracing every beam twice. Returns (hit_ranges, hits, cells_changed).
    """
    h, w = occ.shape
    m = 3 * (w + h) + 8
    cxs = np.empty(m, np.int64)
    cys = np.empty(m, np.int64)
    ts = np.empty(m, np.float64)
    grp = np.empty(m, np.int64)
    ranges = np.empty(n_beams, np.float64)
    hits = np.zeros(n_beams, np.bool_)
    changed = 0
    for j in range(n_beams):
        ang = 2.0 * math.pi * j / n_beams
        dx = math.cos(ang)
        dy = math.sin(ang)
        n = trace_cells(ox, oy, dx, dy, max_range, res, w, h, cxs, cys, ts, grp)
        hit_i = -1
        for i in range(n):
            if occ[cys[i], cxs[i]] == OCC_WALL:
                hit_i = i
                break
        if hit_i < 0:
            hit_t = max_range
            for i in range(n):
                if ts[i] < hit_t:
                    if known[cys[i], cxs[i]] == UNKNOWN:
                        known[cys[i], cxs[i]] = FREE
                        changed += 1
        else:
            hit_t = ts[hit_i]
            for i in range(hit_i):
                if ts[i] < hit_t:
                    if known[cys[i], cxs[i]] == UNKNOWN:
                        known[cys[i], cxs[i]] = FREE
                        changed += 1
            if known[cys[hit_i], cxs[hit_i]] != OBSTACLE:
                known[cys[hit_i], cxs[hit_i]] = OBSTACLE
                changed += 1
            hits[j] = True
        ranges[j] = hit_t
    return ranges, hits, changed


@njit(cache=True)
def _heap_push(heap_p, heap_n, size, p, node):
    i = size
    heap_p[i] = p
    heap_n[i] = node
    while i > 0:
        parent = (i - 1) // 2
        if heap_p[parent] <= heap_p[i]:
            break
        heap_p[parent], heap_p[i] = heap_p[i], heap_p[parent]
        heap_n[parent], heap_n[i] = heap_n[i], heap_n[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(heap_p, heap_n, size):
    p = heap_p[0]
    node = heap_n[0]
    size -= 1
    heap_p[0] = heap_p[size]
    heap_n[0] = heap_n[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        smallest = i
        if l < size and heap_p[l] < heap_p[smallest]:
            smallest = l
        if r < size and heap_p[r] < heap_p[smallest]:
            smallest = r
        if smallest == i:
            break
        heap_p[smallest], heap_p[i] = heap_p[i], heap_p[smallest]
        heap_n[smallest], heap_n[i] = heap_n[i], heap_n[smallest]
        i = smallest
    return p, node, size


@njit(cache=True)
def grid_dijkstra(passable, sx, sy, res, targets):
    """8-connected uniform-cost search over passable cells.

    Step costs: res (axis), res*sqrt(2) (diagonal). Diagonal moves are
    forbidden when both orthogonal neighbor cells are impassable. `targets`
    is an int64 array of flat cell indices (cy * w + cx); when non-empty the
    search stops once every reachable target is settled (an empty array
    computes the full field).

    Returns (dist, pred, n_axis, n_diag): dist in meters ((h, w) float64, inf
    = not reached), pred encodes the predecessor as cy * w + cx (-1 = none),
    and n_axis / n_diag count the step kinds of the recorded optimal path so
    exact lengths can be recomputed without float accumulation error.
    """
    h, w = passable.shape
    n_cells = w * h
    dist = np.full((h, w), np.inf, np.float64)
    pred = np.full((h, w), -1, np.int64)
    n_axis = np.zeros((h, w), np.int32)
    n_diag = np.zeros((h, w), np.int32)
    cap = 4 * n_cells + 16
    heap_p = np.empty(cap, np.float64)
    heap_n = np.empty(cap, np.int64)
    size = 0
    diag = res * _SQRT2

    if sx < 0 or sx >= w or sy < 0 or sy >= h or not passable[sy, sx]:
        return dist, pred, n_axis, n_diag
    dist[sy, sx] = 0.0
    size = _heap_push(heap_p, heap_n, size, 0.0, sy * w + sx)

    target_mask = np.zeros(n_cells, np.bool_)
    remaining = 0
    for i in range(targets.size):
        t = targets[i]
        if 0 <= t < n_cells and not target_mask[t]:
            target_mask[t] = True
            remaining += 1
    track_targets = remaining > 0

    while size > 0:
        d, node, size = _heap_pop(heap_p, heap_n, size)
        cy = node // w
        cx = node % w
        if d > dist[cy, cx]:
            continue
        if track_targets and target_mask[node]:
            target_mask[node] = False
            remaining -= 1
            if remaining == 0:
                break
        for k in range(8):
            ddx = _NBR_DX[k]
            ddy = _NBR_DY[k]
            nx = cx + ddx
            ny = cy + ddy
            if nx < 0 or nx >= w or ny < 0 or ny >= h:
                continue
            if not passable[ny, nx]:
                continue
            is_diag = ddx != 0 and ddy != 0
            if is_diag:
                if (not passable[cy, nx]) and (not passable[ny, cx]):
                    continue
            nd = d + (diag if is_diag else res)
            if nd < dist[ny, nx]:
                dist[ny, nx] = nd
                pred[ny, nx] = node
                if is_diag:
                    n_axis[ny, nx] = n_axis[cy, cx]
                    n_diag[ny, nx] = n_diag[cy, cx] + 1
                else:
                    n_axis[ny, nx] = n_axis[cy, cx] + 1
                    n_diag[ny, nx] = n_diag[cy, cx]
                if size >= cap - 1:
                    new_cap = cap * 2
                    new_p = np.empty(new_cap, np.float64)
                    new_n = np.empty(new_cap, np.int64)
                    new_p[:size] = heap_p[:size]
                    new_n[:size] = heap_n[:size]
                    heap_p = new_p
                    heap_n = new_n
                    cap = new_cap
                size = _heap_push(heap_p, heap_n, size, nd, ny * w + nx)
    return dist, pred, n_axis, n_diag
