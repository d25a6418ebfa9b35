"""Communication graph, cluster formation and merging, leaders, formation slots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .decay import ExplorationTrace, merge_traces
from .frontier import FrontierSet, extract_frontiers
from .gridworld import OccupancyGrid, Pose, line_of_sight
from .perception import KnownMap, merge_maps


@dataclass(frozen=True)
class CommGraph:
    nodes: tuple[int, ...]
    edges: frozenset[tuple[int, int]]  # (i, j) with i < j

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)


@dataclass
class Cluster:
    """A connected robot group: one leader, a merged map, frontiers, one trace."""

    members: frozenset[int]
    leader: int
    merged_map: KnownMap
    frontiers: FrontierSet
    trace: ExplorationTrace

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class ClusterSet:
    clusters: list[Cluster]

    def __post_init__(self):
        self.clusters.sort(key=lambda c: c.leader)

    @property
    def max_size(self) -> int:
        return max(c.size for c in self.clusters)

    def robot_ids(self) -> list[int]:
        return sorted(r for c in self.clusters for r in c.members)

    def cluster_of(self, robot: int) -> Cluster:
        for c in self.clusters:
            if robot in c.members:
                return c
        raise KeyError(robot)


def build_comm_graph(poses: dict[int, Pose], grid: OccupancyGrid, d: float) -> CommGraph:
    """Edge (i, j) iff Euclidean distance <= d and unobstructed line of sight."""
    ids = sorted(poses)
    edges = set()
    for a_i, i in enumerate(ids):
        for j in ids[a_i + 1 :]:
            pi, pj = poses[i], poses[j]
            if math.hypot(pi.x - pj.x, pi.y - pj.y) <= d and line_of_sight(grid, pi, pj):
                edges.add((i, j))
    return CommGraph(tuple(ids), frozenset(edges))


def elect_leader(members) -> int:
    """Deterministic stand-in for distributed consensus: smallest id wins."""
    members = list(members)
    if not members:
        raise ValueError("cannot elect a leader from no members")
    return min(members)


def merge_clusters(group: list[Cluster], id_iter=None, min_cells: int = 1,
                   members: frozenset[int] | None = None) -> Cluster:
    """Fuse clusters into one: union members, elect leader, join maps,
    re-extract real frontiers, merge traces and prune virtual frontiers."""
    if members is None:
        members = frozenset(r for c in group for r in c.members)
    leader = elect_leader(members)
    merged_map = merge_maps([c.merged_map for c in group])
    ordered = sorted(group, key=lambda c: c.leader)
    virtual_in = [f for c in ordered for f in c.frontiers.virtual]
    trace, pruned_virtual = merge_traces([c.trace for c in ordered], virtual_in, merged_map, id_iter)
    real = extract_frontiers(merged_map, min_cells=min_cells, id_iter=id_iter)
    return Cluster(members, leader, merged_map, FrontierSet(real, pruned_virtual), trace)


def on_merge(a: Cluster, b: Cluster, id_iter=None, min_cells: int = 1) -> Cluster:
    if a.members & b.members:
        raise ValueError("merging clusters must be disjoint")
    return merge_clusters([a, b], id_iter, min_cells)


def update_clusters(
    current: ClusterSet,
    graph: CommGraph,
    id_iter=None,
    failed: frozenset[int] = frozenset(),
    min_cells: int = 1,
):
    """Recompute the partition for one tick.

    Robots keep their current cluster (perfect formation), clusters merge when
    any cross-cluster edge exists, and a failed robot is split out into a
    singleton. Returns (new ClusterSet, merge_events, split_events); a merge
    event lists the old clusters fused, a split event pairs an old cluster
    with the member groups it broke into.
    """
    ids = current.robot_ids()
    if sorted(graph.nodes) != ids:
        raise ValueError("cluster set and comm graph cover different robots")

    parent = {r: r for r in ids}

    def find(r):
        while parent[r] != r:
            parent[r] = parent[parent[r]]
            r = parent[r]
        return r

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            parent[rb] = ra

    for c in current.clusters:
        alive = sorted(r for r in c.members if r not in failed)
        for r in alive[1:]:
            union(alive[0], r)
    for i, j in sorted(graph.edges):
        if i in failed or j in failed:
            continue
        union(i, j)

    groups: dict[int, list[int]] = {}
    for r in ids:
        groups.setdefault(find(r), []).append(r)

    index_of = {}
    for idx, c in enumerate(current.clusters):
        for r in c.members:
            index_of[r] = idx

    merge_events = []
    new_clusters: list[Cluster] = []
    for root in sorted(groups):
        members = frozenset(groups[root])
        old_idxs = sorted({index_of[r] for r in members})
        olds = [current.clusters[i] for i in old_idxs]
        if len(olds) == 1 and olds[0].members == members:
            new_clusters.append(olds[0])
            continue
        if len(olds) > 1:
            merge_events.append(tuple(olds))
            new_clusters.append(merge_clusters(olds, id_iter, min_cells, members=members))
            continue
        # Fragment of a cluster that lost members (failure-injection only).
        old = olds[0]
        leader = elect_leader(members)
        keeps_trace = old.leader in members
        if keeps_trace:
            trace = old.trace
        else:
            trace = ExplorationTrace(
                leader,
                old.merged_map.cells.shape,
                old.merged_map.resolution,
                old.trace.footprint_radius,
                old.trace.chunk_size,
            )
        new_clusters.append(
            Cluster(
                members,
                leader,
                old.merged_map.copy(),
                FrontierSet(list(old.frontiers.real), list(old.frontiers.virtual) if keeps_trace else []),
                trace,
            )
        )

    split_events = []
    for c in current.clusters:
        roots = sorted({find(r) for r in c.members})
        if len(roots) > 1:
            split_events.append((c, tuple(frozenset(groups[r]) & c.members for r in roots)))
    return ClusterSet(new_clusters), merge_events, split_events


def formation_targets(history: list[Pose], n_followers: int, spacing: float) -> list[Pose]:
    """Follower j sits (j+1)*spacing of arc-length behind the leader along its
    path history, clamped to the oldest recorded pose."""
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    if n_followers < 0:
        raise ValueError("n_followers must be >= 0")
    if n_followers == 0:
        return []
    if not history:
        raise ValueError("history must contain at least one pose")
    cum = [0.0]
    for p, q in zip(history, history[1:]):
        cum.append(cum[-1] + math.hypot(q.x - p.x, q.y - p.y))
    total = cum[-1]
    out = []
    for j in range(n_followers):
        s = total - (j + 1) * spacing
        if s <= 0.0 or len(history) == 1:
            out.append(history[0])
            continue
        # Last segment index with cum[i] <= s.
        lo, hi = 0, len(cum) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if cum[mid] <= s:
                lo = mid
            else:
                hi = mid - 1
        i = lo
        if i >= len(history) - 1:
            out.append(history[-1])
            continue
        p, q = history[i], history[i + 1]
        seg = cum[i + 1] - cum[i]
        frac = 0.0 if seg == 0.0 else (s - cum[i]) / seg
        x = p.x + (q.x - p.x) * frac
        y = p.y + (q.y - p.y) * frac
        heading = math.atan2(q.y - p.y, q.x - p.x) % (2.0 * math.pi)
        out.append(Pose(x, y, heading))
    return out
