"""Time-stepped closed-loop engine: sense, decay, select, plan, move, merge.

One run is strictly single-threaded and deterministic: identical
(grid, config, seed) triples produce identical results.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import FREE, UNKNOWN
from .decay import DecayEvent, ExplorationTrace
from .frontier import VIRTUAL, Frontier, FrontierSet, extract_frontiers, select_frontier_with_path
from .gridworld import Cell, OccupancyGrid, Pose, plan_path
from .perception import KnownMap, integrate_scan, simulate_lidar, sweep_and_integrate
from .team import Cluster, ClusterSet, build_comm_graph, update_clusters

FBE = "fbe"
FBR = "fbr"

IDLE = "idle"
NAVIGATING = "navigating"
FALLBACK = "fallback"

LEADER = "leader"
FOLLOWER = "follower"

TERM_RENDEZVOUS = "Rendezvous"
TERM_FRONTIERS_EXHAUSTED = "FrontiersExhausted"
TERM_TIME_LIMIT = "TimeLimit"
TERM_FAULT = "Fault"

_EPS = 1e-9


class SpawnError(RuntimeError):
    """No valid spawn configuration found."""


class SimulationFault(RuntimeError):
    """Internal inconsistency (e.g. a robot inside a wall)."""


@dataclass
class SimConfig:
    m: int
    strategy: str = FBR
    comm_range: float = 2.7
    speed: float = 0.3
    lidar_range: float = 10.0
    n_beams: int = 360
    alpha: float = 0.25
    decay_T: float = 300.0
    pose_interval: float = 2.0
    chunk_size: int = 9
    min_frontier_cells: int = 3
    tick: float = 0.5
    seed: int = 0
    time_limit: float = 7200.0
    formation_spacing: float | None = None  # defaults to comm_range / 2
    range_noise_std: float = 0.0  # optional; keep 0 for reproducible runs
    record_decay_events: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.strategy not in (FBE, FBR):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for name in ("comm_range", "speed", "lidar_range", "decay_T", "pose_interval", "tick", "time_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.tick > self.pose_interval:
            raise ValueError("tick must not exceed pose_interval")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_beams < 8:
            raise ValueError("n_beams must be >= 8")
        if self.chunk_size < 1 or self.min_frontier_cells < 1:
            raise ValueError("chunk_size and min_frontier_cells must be >= 1")

    @property
    def spacing(self) -> float:
        return self.formation_spacing if self.formation_spacing is not None else self.comm_range / 2.0


@dataclass
class RobotState:
    id: int
    pose: Pose
    role: str = LEADER
    mode: str = IDLE
    odometer: float = 0.0
    target_frontier: Frontier | None = None
    path_pts: list[tuple[float, float]] | None = None
    path_idx: int = 0


@dataclass
class RunResult:
    success: bool
    t_rendezvous: float | None
    t_partial: list[float | None]  # t_i for i = 1..m, adjusted clock
    max_cluster_series: list[tuple[float, int]]
    area_union_m2: float
    area_intersection_m2: float
    odometers: dict[int, float]
    fallback_time_excluded: float
    terminated_by: str
    final_poses: dict[int, Pose]
    sim_time_s: float

    @property
    def total_distance_m(self) -> float:
        return sum(self.odometers.values())


class PathHistory:
    """Arc-length indexed polyline of the positions a leader actually drove."""

    __slots__ = ("xs", "ys", "cum")

    def __init__(self, x: float, y: float):
        self.xs = [x]
        self.ys = [y]
        self.cum = [0.0]

    def append(self, x: float, y: float) -> None:
        d = math.hypot(x - self.xs[-1], y - self.ys[-1])
        if d == 0.0:
            return
        self.xs.append(x)
        self.ys.append(y)
        self.cum.append(self.cum[-1] + d)

    def pose_back(self, s_back: float) -> Pose:
        """Pose s_back meters of arc behind the newest point (clamped to oldest)."""
        s = self.cum[-1] - s_back
        if s <= self.cum[0] or len(self.cum) == 1:
            if len(self.cum) > 1:
                h = math.atan2(self.ys[1] - self.ys[0], self.xs[1] - self.xs[0]) % (2.0 * math.pi)
            else:
                h = 0.0
            return Pose(self.xs[0], self.ys[0], h)
        lo, hi = 0, len(self.cum) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.cum[mid] <= s:
                lo = mid
            else:
                hi = mid - 1
        if lo >= len(self.cum) - 1:
            return Pose(self.xs[-1], self.ys[-1], 0.0)
        seg = self.cum[lo + 1] - self.cum[lo]
        frac = 0.0 if seg == 0.0 else (s - self.cum[lo]) / seg
        x = self.xs[lo] + (self.xs[lo + 1] - self.xs[lo]) * frac
        y = self.ys[lo] + (self.ys[lo + 1] - self.ys[lo]) * frac
        h = math.atan2(self.ys[lo + 1] - self.ys[lo], self.xs[lo + 1] - self.xs[lo]) % (2.0 * math.pi)
        return Pose(x, y, h)

    def trim(self, keep_arc: float) -> None:
        """Drop old points while keeping at least keep_arc of trailing arc."""
        if len(self.cum) < 8192:
            return
        cutoff = self.cum[-1] - keep_arc
        k = 0
        while k + 1 < len(self.cum) and self.cum[k + 1] <= cutoff:
            k += 1
        if k > 0:
            del self.xs[:k]
            del self.ys[:k]
            del self.cum[:k]


def spawn(grid: OccupancyGrid, config: SimConfig, rng: np.random.Generator | None = None) -> dict[int, Pose]:
    """Draw m distinct free spawn cells, none initially connected to another.

    A candidate is rejected when it repeats a cell or sits within comm range
    with line of sight of an already placed robot; after 10*m^2 rejections the
    spawn fails.
    """
    from .gridworld import line_of_sight

    if rng is None:
        rng = np.random.default_rng(config.seed)
    free = grid.free_cell_array()
    if len(free) < config.m:
        raise SpawnError(f"map has {len(free)} free cells for {config.m} robots")
    placed: list[Pose] = []
    used: set[Cell] = set()
    rejections = 0
    limit = 10 * config.m * config.m
    while len(placed) < config.m:
        idx = int(rng.integers(0, len(free)))
        cy, cx = int(free[idx][0]), int(free[idx][1])
        x, y = grid.cell_center((cx, cy))
        pose = Pose(x, y, 0.0)
        conflict = (cx, cy) in used or any(
            math.hypot(p.x - x, p.y - y) <= config.comm_range and line_of_sight(grid, p, pose)
            for p in placed
        )
        if conflict:
            rejections += 1
            if rejections > limit:
                raise SpawnError(f"no valid spawn found after {limit} rejections")
            continue
        placed.append(pose)
        used.add((cx, cy))
    return {i: p for i, p in enumerate(placed)}


class Simulation:
    """Owns the full mutable state of one run; stepped by `run` or manually."""

    def __init__(self, grid: OccupancyGrid, config: SimConfig):
        self.grid = grid
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)
        poses = spawn(grid, config, self.rng)
        self.robots = {i: RobotState(i, poses[i]) for i in range(config.m)}
        self.histories = {i: PathHistory(poses[i].x, poses[i].y) for i in range(config.m)}
        self.id_iter = itertools.count()
        shape = (grid.height, grid.width)
        clusters = []
        self._last_append: dict[int, float] = {}
        for i in range(config.m):
            trace = ExplorationTrace(i, shape, grid.resolution, config.comm_range, config.chunk_size)
            trace.append_pose(poses[i], 0.0)
            self._last_append[i] = 0.0
            clusters.append(
                Cluster(frozenset({i}), i, KnownMap.blank(grid), FrontierSet(), trace)
            )
        self.cluster_set = ClusterSet(clusters)
        self.time = 0.0
        self.fallback_excluded = 0.0
        self.best_max = 1
        self.t_partial: list[float | None] = [None] * config.m
        self.t_partial[0] = 0.0
        self.series: list[tuple[float, int]] = [(0.0, 1)]
        self.terminated: str | None = None
        self.decay_events: list[tuple[float, int, DecayEvent]] = []
        self._scan_key: dict[int, tuple] = {}
        self._extract_cache: dict[int, tuple] = {}
        self._fallback_cache: dict[int, tuple] = {}
        self._fallback_retry: dict[int, tuple] = {}
        if config.m == 1:
            self.terminated = TERM_RENDEZVOUS

    # -- per-phase helpers ---------------------------------------------------

    def _sense(self, cluster: Cluster, st: RobotState) -> None:
        key = self._scan_key.get(cluster.leader)
        cur = (st.pose.x, st.pose.y, id(cluster.merged_map), cluster.merged_map.version)
        if key == cur:
            return
        try:
            if self.cfg.range_noise_std > 0.0:
                scan = simulate_lidar(
                    self.grid, st.pose, self.cfg.lidar_range, self.cfg.n_beams,
                    self.rng, self.cfg.range_noise_std,
                )
                integrate_scan(cluster.merged_map, scan)
            else:
                sweep_and_integrate(
                    self.grid, cluster.merged_map, st.pose, self.cfg.lidar_range, self.cfg.n_beams
                )
        except ValueError as exc:
            raise SimulationFault(str(exc)) from exc
        self._scan_key[cluster.leader] = (
            st.pose.x, st.pose.y, id(cluster.merged_map), cluster.merged_map.version
        )

    def _real_frontiers(self, cluster: Cluster) -> list[Frontier]:
        key = (id(cluster.merged_map), cluster.merged_map.version)
        hit = self._extract_cache.get(cluster.leader)
        if hit is not None and hit[0] == key:
            return hit[1]
        out = extract_frontiers(cluster.merged_map, self.cfg.min_frontier_cells, id_iter=self.id_iter)
        self._extract_cache[cluster.leader] = (key, out)
        return out

    def _fallback_cell(self, cluster: Cluster) -> Cell | None:
        key = (id(cluster.merged_map), cluster.merged_map.version)
        hit = self._fallback_cache.get(cluster.leader)
        if hit is not None and hit[0] == key:
            return hit[1]
        free = np.argwhere(cluster.merged_map.cells == FREE)
        if len(free) == 0:
            cell = None
        else:
            fy = free[:, 0].mean()
            fx = free[:, 1].mean()
            d2 = (free[:, 0] - fy) ** 2 + (free[:, 1] - fx) ** 2
            k = np.lexsort((free[:, 1], free[:, 0], d2))[0]
            cell = (int(free[k][1]), int(free[k][0]))
        self._fallback_cache[cluster.leader] = (key, cell)
        return cell

    def _clear_path(self, st: RobotState) -> None:
        st.mode = IDLE
        st.target_frontier = None
        st.path_pts = None
        st.path_idx = 0

    def _set_path(self, st: RobotState, mode: str, target: Frontier | None, waypoints) -> None:
        pts = [(st.pose.x, st.pose.y)]
        for c in waypoints:
            pts.append(self.grid.cell_center(c))
        st.mode = mode
        st.target_frontier = target
        st.path_pts = pts
        st.path_idx = 0

    def _target_valid(self, cluster: Cluster, st: RobotState) -> bool:
        f = st.target_frontier
        if f is None:
            return False
        if f.kind == VIRTUAL:
            return any(v.id == f.id for v in cluster.frontiers.virtual)
        cells = cluster.merged_map.cells
        cx, cy = f.target
        if cells[cy, cx] != FREE:
            return False
        h, w = cells.shape
        y0, y1 = max(cy - 1, 0), min(cy + 2, h)
        x0, x1 = max(cx - 1, 0), min(cx + 2, w)
        return bool((cells[y0:y1, x0:x1] == UNKNOWN).any())

    def _try_select(self, cluster: Cluster, st: RobotState) -> bool:
        """Pick a frontier (or FBE fallback) for an idle leader. True if it now has a goal."""
        real = self._real_frontiers(cluster)
        cluster.frontiers = FrontierSet(real, cluster.frontiers.virtual)
        fs = FrontierSet(real, cluster.frontiers.virtual if self.cfg.strategy == FBR else [])
        robot_cell = cluster.merged_map.cell_of(st.pose.x, st.pose.y)
        sel = select_frontier_with_path(fs, robot_cell, cluster.merged_map, self.cfg.alpha)
        if sel is not None:
            f, path = sel
            self._set_path(st, NAVIGATING, f, path.waypoints)
            return True
        if self.cfg.strategy == FBE:
            cell = self._fallback_cell(cluster)
            if cell is not None and cell != robot_cell:
                path = plan_path(cluster.merged_map, robot_cell, cell)
                if path is not None:
                    self._set_path(st, FALLBACK, None, path.waypoints)
                    self._fallback_retry[cluster.leader] = (
                        id(cluster.merged_map), cluster.merged_map.version
                    )
                    return True
        return False

    def _advance(self, cluster: Cluster, st: RobotState, dt: float) -> float:
        if st.path_pts is None:
            return 0.0
        budget = self.cfg.speed * dt
        hist = self.histories[st.id]
        x, y = st.pose.x, st.pose.y
        heading = st.pose.heading
        i = st.path_idx
        pts = st.path_pts
        moved = 0.0
        while budget > 1e-12 and i < len(pts):
            tx, ty = pts[i]
            d = math.hypot(tx - x, ty - y)
            if d <= 1e-12:
                i += 1
                continue
            heading = math.atan2(ty - y, tx - x) % (2.0 * math.pi)
            if d <= budget:
                x, y = tx, ty
                budget -= d
                moved += d
                i += 1
            else:
                frac = budget / d
                x += (tx - x) * frac
                y += (ty - y) * frac
                moved += budget
                budget = 0.0
            hist.append(x, y)
        st.path_idx = i
        st.odometer += moved
        st.pose = Pose(x, y, heading)
        if i >= len(pts):
            target = st.target_frontier
            self._clear_path(st)
            if target is not None and target.kind == VIRTUAL:
                cluster.frontiers.virtual = [
                    f for f in cluster.frontiers.virtual if f.id != target.id
                ]
        hist.trim((self.cfg.m + 2) * self.cfg.spacing + 5.0)
        return moved

    def _apply_merges(self, merge_events) -> None:
        for ev in merge_events:
            members = frozenset(r for c in ev for r in c.members)
            new_cluster = next(c for c in self.cluster_set.clusters if c.members == members)
            for rid in sorted(new_cluster.members):
                st = self.robots[rid]
                st.role = LEADER if rid == new_cluster.leader else FOLLOWER
                self._clear_path(st)
            for c in ev:
                if c.leader != new_cluster.leader:
                    self._scan_key.pop(c.leader, None)
                    self._extract_cache.pop(c.leader, None)
                    self._fallback_cache.pop(c.leader, None)
                    self._fallback_retry.pop(c.leader, None)
                    self._last_append.pop(c.leader, None)

    def _check_in_free_cell(self, st: RobotState) -> None:
        if self.grid.is_wall(self.grid.cell_of(st.pose.x, st.pose.y)):
            raise SimulationFault(f"robot {st.id} entered an obstacle cell at ({st.pose.x}, {st.pose.y})")

    # -- main loop -----------------------------------------------------------

    def step(self, dt: float | None = None) -> None:
        if self.terminated is not None:
            return
        cfg = self.cfg
        dt = cfg.tick if dt is None else dt
        t0 = self.time
        fallback_tick = False
        any_progress = False

        for cluster in list(self.cluster_set.clusters):
            leader = cluster.leader
            st = self.robots[leader]
            self._sense(cluster, st)

            if t0 - self._last_append.get(leader, -math.inf) >= cfg.pose_interval - _EPS:
                cluster.trace.append_pose(st.pose, t0)
                self._last_append[leader] = t0
                if cfg.strategy == FBR and cluster.frontiers.virtual:
                    cluster.frontiers.virtual = [
                        f for f in cluster.frontiers.virtual if not cluster.trace.in_footprint(f.target)
                    ]

            if cfg.strategy == FBR:
                ev = cluster.trace.decay_step(cluster.merged_map, t0, cfg.decay_T, self.id_iter)
                if ev is not None:
                    cluster.frontiers.virtual.extend(ev.new_virtual_frontiers)
                    if cfg.record_decay_events:
                        self.decay_events.append((t0, leader, ev))

            if st.mode == NAVIGATING and not self._target_valid(cluster, st):
                self._clear_path(st)
            elif st.mode == FALLBACK:
                # New knowledge may have produced frontiers; prefer them.
                key = (id(cluster.merged_map), cluster.merged_map.version)
                if self._fallback_retry.get(leader) != key:
                    self._fallback_retry[leader] = key
                    if self._real_frontiers(cluster):
                        if self._try_select(cluster, st):
                            any_progress = True

            if st.mode == IDLE:
                if self._try_select(cluster, st):
                    any_progress = True

            in_fallback = st.mode == FALLBACK
            moved = self._advance(cluster, st, dt)
            if in_fallback:
                fallback_tick = True
            if moved > 0.0:
                any_progress = True
            self._check_in_free_cell(st)

            followers = sorted(r for r in cluster.members if r != leader)
            hist = self.histories[leader]
            for j, rid in enumerate(followers):
                fst = self.robots[rid]
                pose = hist.pose_back((j + 1) * cfg.spacing)
                shift = math.hypot(pose.x - fst.pose.x, pose.y - fst.pose.y)
                if shift > 0.0:
                    fst.odometer += shift
                    any_progress = True
                fst.pose = pose
                self._check_in_free_cell(fst)

        if fallback_tick:
            self.fallback_excluded += dt

        poses = {i: s.pose for i, s in self.robots.items()}
        graph = build_comm_graph(poses, self.grid, cfg.comm_range)
        new_cs, merge_events, _ = update_clusters(
            self.cluster_set, graph, self.id_iter, min_cells=cfg.min_frontier_cells
        )
        self.cluster_set = new_cs
        if merge_events:
            self._apply_merges(merge_events)
            any_progress = True

        self.time = t0 + dt
        adjusted = self.time - self.fallback_excluded
        cur_max = self.cluster_set.max_size
        if cur_max > self.best_max:
            for i in range(self.best_max + 1, cur_max + 1):
                self.t_partial[i - 1] = adjusted
            self.series.append((adjusted, cur_max))
            self.best_max = cur_max
        if self.best_max == cfg.m:
            self.terminated = TERM_RENDEZVOUS
            return
        if cfg.strategy == FBE and not any_progress and all(
            self.robots[c.leader].mode == IDLE for c in self.cluster_set.clusters
        ):
            self.terminated = TERM_FRONTIERS_EXHAUSTED
            return
        if self.time >= cfg.time_limit - _EPS:
            self.terminated = TERM_TIME_LIMIT

    def run(self) -> RunResult:
        try:
            while self.terminated is None:
                self.step()
        except SimulationFault:
            self.terminated = TERM_FAULT
        return self.result()

    def result(self) -> RunResult:
        if self.terminated is None:
            raise RuntimeError("run has not terminated")
        success = self.terminated == TERM_RENDEZVOUS
        known_masks = [
            self.cluster_set.cluster_of(r).merged_map.known_mask() for r in sorted(self.robots)
        ]
        union = known_masks[0].copy()
        inter = known_masks[0].copy()
        for m in known_masks[1:]:
            union |= m
            inter &= m
        cell_area = self.grid.resolution ** 2
        t_rend = self.t_partial[self.cfg.m - 1] if success else None
        return RunResult(
            success=success,
            t_rendezvous=t_rend,
            t_partial=list(self.t_partial),
            max_cluster_series=list(self.series),
            area_union_m2=float(np.count_nonzero(union)) * cell_area,
            area_intersection_m2=float(np.count_nonzero(inter)) * cell_area,
            odometers={i: s.odometer for i, s in self.robots.items()},
            fallback_time_excluded=self.fallback_excluded,
            terminated_by=self.terminated,
            final_poses={i: s.pose for i, s in self.robots.items()},
            sim_time_s=self.time,
        )


def run(grid: OccupancyGrid, config: SimConfig) -> RunResult:
    return Simulation(grid, config).run()
