"""Exploration traces, information decay, and virtual frontier generation.

A trace is the area swept by a robot's communication-radius footprint along
its trajectory, stored as timestamped poses plus a bitmap. Poses decay in
chunks once their chunk has fully aged past T; every removal event turns the
vanished area's contour into virtual frontiers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import FREE
from .frontier import VIRTUAL, Frontier, adjacency_mask, components_to_frontiers
from .gridworld import Pose
from .perception import KnownMap


@dataclass(frozen=True)
class TracePose:
    pose: Pose
    timestamp: float
    ordinal: int  # append index within the owner's own history
    chunk_id: int  # ordinal // chunk_size
    owner: int


@dataclass
class DecayEvent:
    removed_poses: list[TracePose]
    vanished_region: np.ndarray  # bool (h, w)
    new_virtual_frontiers: list[Frontier]


def stamp_disk(mask: np.ndarray, px: float, py: float, radius: float, res: float) -> None:
    """OR a discretized disk (cell centers within radius of the point) into mask."""
    h, w = mask.shape
    x0 = max(int(math.floor((px - radius) / res)), 0)
    x1 = min(int(math.floor((px + radius) / res)), w - 1)
    y0 = max(int(math.floor((py - radius) / res)), 0)
    y1 = min(int(math.floor((py + radius) / res)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = (np.arange(x0, x1 + 1) + 0.5) * res - px
    ys = (np.arange(y0, y1 + 1) + 0.5) * res - py
    d2 = xs[None, :] ** 2 + ys[:, None] ** 2
    mask[y0 : y1 + 1, x0 : x1 + 1] |= d2 <= radius * radius


class ExplorationTrace:
    """Timestamped pose chain plus its footprint bitmap (disks of radius d)."""

    def __init__(self, owner: int, shape: tuple[int, int], resolution: float,
                 footprint_radius: float, chunk_size: int):
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if footprint_radius <= 0:
            raise ValueError("footprint_radius must be > 0")
        self.owner = owner
        self.resolution = resolution
        self.footprint_radius = footprint_radius
        self.chunk_size = chunk_size
        self.poses: list[TracePose] = []
        self.footprint = np.zeros(shape, dtype=bool)
        self.vanished_union = np.zeros(shape, dtype=bool)
        self.all_poses: list[TracePose] = []  # full append history, merges aside
        self._next_ordinal = 0
        self._id_iter = itertools.count()

    def append_pose(self, pose: Pose, now: float) -> "ExplorationTrace":
        if self.poses and now <= self.poses[-1].timestamp and self.poses[-1].owner == self.owner:
            raise ValueError("timestamps must be strictly increasing per owner")
        tp = TracePose(pose, now, self._next_ordinal, self._next_ordinal // self.chunk_size, self.owner)
        self._next_ordinal += 1
        self.poses.append(tp)
        self.all_poses.append(tp)
        stamp_disk(self.footprint, pose.x, pose.y, self.footprint_radius, self.resolution)
        return self

    def recompute_footprint(self) -> np.ndarray:
        fp = np.zeros_like(self.footprint)
        for tp in self.poses:
            stamp_disk(fp, tp.pose.x, tp.pose.y, self.footprint_radius, self.resolution)
        return fp

    def in_footprint(self, cell) -> bool:
        return bool(self.footprint[cell[1], cell[0]])

    def decay_step(self, known: KnownMap, now: float, T: float, id_iter=None) -> DecayEvent | None:
        """Remove the oldest chunk once its newest pose has aged past T.

        The vanished region is the footprint lost by the removal; its contour
        (vanished cells that are Free in `known` and touch a non-vanished
        cell) becomes one virtual frontier per 8-connected component. At most
        one chunk is removed per call; returns None when nothing decays.
        """
        if T <= 0:
            raise ValueError("T must be > 0")
        if not self.poses:
            return None
        key = (self.poses[0].owner, self.poses[0].chunk_id)
        chunk = [tp for tp in self.poses if (tp.owner, tp.chunk_id) == key]
        newest = max(tp.timestamp for tp in chunk)
        if now - newest <= T:
            return None
        self.poses = [tp for tp in self.poses if (tp.owner, tp.chunk_id) != key]
        old_fp = self.footprint
        self.footprint = self.recompute_footprint()
        vanished = old_fp & ~self.footprint
        self.vanished_union |= vanished
        contour = vanished & (known.cells == FREE) & adjacency_mask(~vanished)
        frontiers = components_to_frontiers(
            contour, VIRTUAL, self.resolution, min_cells=1,
            id_iter=id_iter if id_iter is not None else self._id_iter,
        )
        return DecayEvent(chunk, vanished, frontiers)


def merge_traces(
    traces: list[ExplorationTrace],
    cluster_virtual: list[Frontier],
    known: KnownMap,
    id_iter=None,
) -> tuple[ExplorationTrace, list[Frontier]]:
    """Merge cluster members' traces and prune their virtual frontiers.

    The merged trace belongs to the smallest owner id (the incoming leader);
    its poses are the time-ordered interleaving of all active poses (ties by
    owner then ordinal) and its footprint the union of the members' active
    footprints. Any virtual frontier cells inside that footprint are deleted;
    survivors are re-split into connected components with recomputed targets
    and lengths, and emptied frontiers are dropped.
    """
    if not traces:
        raise ValueError("merge_traces needs at least one trace")
    base = traces[0]
    for t in traces[1:]:
        if t.footprint.shape != base.footprint.shape or t.chunk_size != base.chunk_size:
            raise ValueError("traces must share dimensions and chunk size")
    leader = min(t.owner for t in traces)
    merged = ExplorationTrace(
        leader, base.footprint.shape, base.resolution, base.footprint_radius, base.chunk_size
    )
    merged.poses = sorted(
        (tp for t in traces for tp in t.poses), key=lambda tp: (tp.timestamp, tp.owner, tp.ordinal)
    )
    merged.all_poses = sorted(
        (tp for t in traces for tp in t.all_poses), key=lambda tp: (tp.timestamp, tp.owner, tp.ordinal)
    )
    for t in traces:
        merged.footprint |= t.footprint
        merged.vanished_union |= t.vanished_union
        if t.owner == leader:
            merged._next_ordinal = t._next_ordinal
            merged._id_iter = t._id_iter

    if id_iter is None:
        id_iter = merged._id_iter
    pruned: list[Frontier] = []
    h, w = merged.footprint.shape
    for f in cluster_virtual:
        kept = [c for c in f.cells if not merged.footprint[c[1], c[0]]]
        if not kept:
            continue
        if len(kept) == len(f.cells):
            pruned.append(f)
            continue
        mask = np.zeros((h, w), dtype=bool)
        for cx, cy in kept:
            mask[cy, cx] = True
        pruned.extend(
            components_to_frontiers(mask, VIRTUAL, merged.resolution, min_cells=1, id_iter=id_iter)
        )
    return merged, pruned
