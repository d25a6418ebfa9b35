import itertools

import numpy as np
import pytest

from fbrsim.decay import ExplorationTrace, merge_traces, stamp_disk
from fbrsim.frontier import VIRTUAL, Frontier
from fbrsim.gridworld import Pose
from fbrsim.perception import KnownMap
from fbrsim._kernels import FREE

from oracles import disk_cells_oracle, footprint_oracle


def all_free_map(shape):
    return KnownMap(0.1, np.full(shape, FREE, dtype=np.uint8))


def make_trace(shape=(60, 60), owner=0, radius=2.7, chunk_size=9):
    return ExplorationTrace(owner, shape, 0.1, radius, chunk_size)


class TestAppendPose:
    def test_first_pose_is_one_disk(self):
        trace = make_trace()
        trace.append_pose(Pose(3.0, 3.0), 0.0)
        expected = disk_cells_oracle(3.0, 3.0, 2.7, 0.1, (60, 60))
        assert np.array_equal(trace.footprint, expected)

    def test_two_overlapping_disks(self):
        trace = make_trace()
        trace.append_pose(Pose(2.7, 3.0), 0.0)
        trace.append_pose(Pose(3.3, 3.0), 2.0)
        expected = footprint_oracle([(2.7, 3.0), (3.3, 3.0)], 2.7, 0.1, (60, 60))
        assert np.array_equal(trace.footprint, expected)
        single = int(disk_cells_oracle(2.7, 3.0, 2.7, 0.1, (60, 60)).sum())
        assert int(trace.footprint.sum()) < 2 * single

    def test_chunk_ids_stable_under_append(self):
        trace = make_trace(chunk_size=3)
        for k in range(7):
            trace.append_pose(Pose(1.0 + 0.1 * k, 1.0), 2.0 * k)
        ids = [tp.chunk_id for tp in trace.poses]
        assert ids == [0, 0, 0, 1, 1, 1, 2]
        trace.append_pose(Pose(2.0, 1.0), 14.0)
        assert [tp.chunk_id for tp in trace.poses][:7] == ids

    def test_timestamps_must_increase(self):
        trace = make_trace()
        trace.append_pose(Pose(1.0, 1.0), 0.0)
        with pytest.raises(ValueError):
            trace.append_pose(Pose(1.1, 1.0), 0.0)


class TestDecayStep:
    def test_below_age_threshold_no_event(self):
        trace = make_trace(chunk_size=3)
        for k in range(3):
            trace.append_pose(Pose(1.0, 1.0 + 0.2 * k), 2.0 * k)
        known = all_free_map((60, 60))
        assert trace.decay_step(known, now=4.0 + 299.0, T=300.0) is None
        assert len(trace.poses) == 3

    def test_isolated_aged_chunk_vanishes_with_contour_frontier(self):
        # One full chunk forming a straight 9-pose segment, then later poses
        # far away so the footprints do not overlap.
        trace = make_trace(shape=(200, 200), chunk_size=9)
        for k in range(9):
            trace.append_pose(Pose(3.0 + 0.3 * k, 3.0), 2.0 * k)
        for k in range(3):
            trace.append_pose(Pose(16.0, 16.0 + 0.3 * k), 18.0 + 2.0 * k)
        known = all_free_map((200, 200))
        old_fp = trace.footprint.copy()
        event = trace.decay_step(known, now=16.0 + 301.0, T=300.0)
        assert event is not None
        assert len(event.removed_poses) == 9
        assert all(tp.chunk_id == 0 for tp in event.removed_poses)
        segment_fp = footprint_oracle(
            [(3.0 + 0.3 * k, 3.0) for k in range(9)], 2.7, 0.1, (200, 200)
        )
        assert np.array_equal(event.vanished_region, segment_fp)
        assert np.array_equal(trace.footprint, old_fp & ~segment_fp)
        assert len(event.new_virtual_frontiers) == 1
        f = event.new_virtual_frontiers[0]
        assert f.kind == VIRTUAL
        # Contour cells: inside the vanished region, bordering its outside.
        for cx, cy in f.cells:
            assert event.vanished_region[cy, cx]
            neighborhood = event.vanished_region[
                max(cy - 1, 0) : cy + 2, max(cx - 1, 0) : cx + 2
            ]
            assert not neighborhood.all()
        assert f.target in f.cells

    def test_fully_overlapped_chunk_gives_empty_event(self):
        trace = make_trace(chunk_size=3)
        for k in range(3):
            trace.append_pose(Pose(3.0, 3.0), 2.0 * k)
        for k in range(3):
            trace.append_pose(Pose(3.0, 3.0), 100.0 + 2.0 * k)
        known = all_free_map((60, 60))
        event = trace.decay_step(known, now=415.0, T=300.0)
        assert event is not None
        assert not event.vanished_region.any()
        assert event.new_virtual_frontiers == []

    def test_idempotent_at_fixed_now(self):
        trace = make_trace(chunk_size=3)
        for k in range(9):
            trace.append_pose(Pose(1.0 + 0.3 * k, 1.0), 2.0 * k)
        known = all_free_map((60, 60))
        now = 4.0 + 300.5  # only chunk 0 (newest pose t=4) is over age
        assert trace.decay_step(known, now, T=300.0) is not None
        assert trace.decay_step(known, now, T=300.0) is None

    def test_chunking_removes_whole_chunks(self):
        trace = make_trace(chunk_size=4)
        for k in range(10):  # chunks of 4, 4, 2
            trace.append_pose(Pose(1.0 + 0.2 * k, 1.0), 2.0 * k)
        known = all_free_map((60, 60))
        sizes = []
        now = 10000.0
        while True:
            ev = trace.decay_step(known, now, T=300.0)
            if ev is None:
                break
            sizes.append(len(ev.removed_poses))
        assert sizes == [4, 4, 2]
        assert trace.poses == []

    def test_virtual_frontier_cells_free_in_known(self):
        trace = make_trace(shape=(80, 80), chunk_size=3)
        for k in range(3):
            trace.append_pose(Pose(2.0 + 0.3 * k, 2.0), 2.0 * k)
        for k in range(3):
            trace.append_pose(Pose(7.8, 7.8), 50.0 + 2.0 * k)
        cells = np.full((80, 80), FREE, dtype=np.uint8)
        cells[:, :15] = 0  # a strip of unknown space under the old footprint
        known = KnownMap(0.1, cells)
        event = trace.decay_step(known, now=400.0, T=300.0)
        assert event is not None
        for f in event.new_virtual_frontiers:
            for cx, cy in f.cells:
                assert known.cells[cy, cx] == FREE

    def test_conservation_identity(self):
        # active footprint + union of vanished regions == footprint of the
        # full pose history, at every decay stage.
        trace = make_trace(shape=(120, 120), chunk_size=3)
        xs = []
        for k in range(15):
            x, y = 2.0 + 0.5 * k, 2.0 + 0.3 * ((k * 7) % 5)
            xs.append((x, y))
            trace.append_pose(Pose(x, y), 2.0 * k)
        known = all_free_map((120, 120))
        full = footprint_oracle(xs, 2.7, 0.1, (120, 120))
        for now in (330.0, 340.0, 350.0, 400.0, 1000.0):
            trace.decay_step(known, now, T=300.0)
            assert np.array_equal(trace.footprint | trace.vanished_union, full)


class TestMergeTraces:
    def test_singleton_merge_is_identity(self):
        trace = make_trace(owner=4)
        trace.append_pose(Pose(2.0, 2.0), 0.0)
        trace.append_pose(Pose(2.5, 2.0), 2.0)
        known = all_free_map((60, 60))
        merged, pruned = merge_traces([trace], [], known)
        assert merged.owner == 4
        assert [tp.pose for tp in merged.poses] == [tp.pose for tp in trace.poses]
        assert np.array_equal(merged.footprint, trace.footprint)
        assert pruned == []

    def test_owner_is_min_id_and_interleaving_ordered(self):
        a = make_trace(owner=2)
        b = make_trace(owner=1)
        for k in range(3):
            a.append_pose(Pose(1.0 + 0.2 * k, 1.0), 2.0 * k)
            b.append_pose(Pose(4.0, 1.0 + 0.2 * k), 2.0 * k)
        merged, _ = merge_traces([a, b], [], all_free_map((60, 60)))
        assert merged.owner == 1
        stamps = [(tp.timestamp, tp.owner) for tp in merged.poses]
        assert stamps == sorted(stamps)

    def test_frontier_inside_footprint_deleted(self):
        a = make_trace(owner=0)
        a.append_pose(Pose(3.0, 3.0), 0.0)
        b = make_trace(owner=1)
        b.append_pose(Pose(5.5, 3.0), 0.0)
        # Virtual frontier of robot 0 sitting inside robot 1's footprint.
        doomed = Frontier(10, VIRTUAL, ((55, 30), (56, 30)), (55, 30), 0.2)
        merged, pruned = merge_traces([a, b], [doomed], all_free_map((120, 120)))
        assert pruned == []

    def test_frontier_crossing_footprint_splits(self):
        a = make_trace(shape=(200, 200), owner=0, radius=1.0)
        a.append_pose(Pose(5.0, 5.0), 0.0)
        b = make_trace(shape=(200, 200), owner=1, radius=1.0)
        b.append_pose(Pose(10.0, 10.0), 0.0)
        # A horizontal line of cells passing straight through b's footprint.
        line = tuple((cx, 100) for cx in range(60, 141))
        crossing = Frontier(3, VIRTUAL, line, (100, 100), 8.1)
        id_iter = itertools.count(100)
        merged, pruned = merge_traces([a, b], [crossing], all_free_map((200, 200)), id_iter)
        assert len(pruned) == 2
        for f in pruned:
            assert f.kind == VIRTUAL
            assert f.id >= 100
            assert f.length_m == pytest.approx(len(f.cells) * 0.1)
            assert f.target in f.cells
            for cx, cy in f.cells:
                assert not merged.footprint[cy, cx]
        assert {c for f in pruned for c in f.cells} == {
            (cx, cy) for cx, cy in line if not merged.footprint[cy, cx]
        }

    def test_untouched_frontier_survives_unchanged(self):
        a = make_trace(owner=0)
        a.append_pose(Pose(1.0, 1.0), 0.0)
        keep = Frontier(42, VIRTUAL, ((55, 55),), (55, 55), 0.1)
        merged, pruned = merge_traces([a], [keep], all_free_map((60, 60)))
        assert pruned == [keep]

    def test_merged_leader_continues_its_ordinals(self):
        a = make_trace(owner=0, chunk_size=3)
        for k in range(4):
            a.append_pose(Pose(1.0 + 0.2 * k, 1.0), 2.0 * k)
        b = make_trace(owner=1, chunk_size=3)
        b.append_pose(Pose(4.0, 4.0), 0.0)
        merged, _ = merge_traces([a, b], [], all_free_map((60, 60)))
        merged.append_pose(Pose(2.0, 1.0), 10.0)
        newest = merged.poses[-1]
        assert newest.owner == 0
        assert newest.ordinal == 4
        assert newest.chunk_id == 1


class TestStampDisk:
    def test_matches_oracle_at_borders(self):
        for px, py in ((0.2, 0.2), (5.9, 0.3), (3.0, 5.8)):
            mask = np.zeros((60, 60), dtype=bool)
            stamp_disk(mask, px, py, 2.7, 0.1)
            assert np.array_equal(mask, disk_cells_oracle(px, py, 2.7, 0.1, (60, 60)))
