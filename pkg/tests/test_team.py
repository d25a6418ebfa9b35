import itertools
import math

import numpy as np
import pytest

from fbrsim.decay import ExplorationTrace
from fbrsim.frontier import FrontierSet
from fbrsim.gridworld import Pose
from fbrsim.perception import KnownMap, integrate_scan, simulate_lidar
from fbrsim.team import (
    Cluster,
    ClusterSet,
    CommGraph,
    build_comm_graph,
    elect_leader,
    formation_targets,
    merge_clusters,
    on_merge,
    update_clusters,
)
from fbrsim._kernels import FREE

from conftest import grid_from_rows
from oracles import graph_components_oracle


def singleton(robot_id, shape=(20, 20)) -> Cluster:
    trace = ExplorationTrace(robot_id, shape, 0.1, 2.7, 9)
    return Cluster(
        frozenset({robot_id}), robot_id, KnownMap(0.1, np.zeros(shape, dtype=np.uint8)),
        FrontierSet(), trace,
    )


def graph_of(nodes, edges) -> CommGraph:
    return CommGraph(tuple(sorted(nodes)), frozenset(tuple(sorted(e)) for e in edges))


class TestBuildCommGraph:
    def test_in_range_with_los(self, open_arena):
        poses = {0: Pose(2.0, 2.0), 1: Pose(4.0, 2.0)}
        g = build_comm_graph(poses, open_arena, 2.7)
        assert g.has_edge(0, 1)

    def test_out_of_range(self, open_arena):
        poses = {0: Pose(2.0, 2.0), 1: Pose(5.0, 2.0)}
        g = build_comm_graph(poses, open_arena, 2.7)
        assert not g.has_edge(0, 1)

    def test_wall_blocks_despite_range(self):
        rows = ["..........", "####......", ".........."]
        grid = grid_from_rows(rows, force_border=False)
        poses = {0: Pose(0.15, 0.05), 1: Pose(0.15, 0.25)}
        g = build_comm_graph(poses, grid, 2.7)
        assert not g.has_edge(0, 1)

    def test_symmetric_no_self_edges(self, open_arena):
        poses = {i: Pose(1.0 + 0.5 * i, 1.0) for i in range(5)}
        g = build_comm_graph(poses, open_arena, 2.7)
        for i, j in g.edges:
            assert i < j


class TestElectLeader:
    def test_examples(self):
        assert elect_leader({3, 1, 2}) == 1
        assert elect_leader({7}) == 7
        assert elect_leader(frozenset({0, 2})) == 0

    def test_permutation_invariant(self):
        for perm in itertools.permutations([4, 9, 2, 6]):
            assert elect_leader(list(perm)) == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            elect_leader(set())


class TestUpdateClusters:
    def test_chain_merges_multi_hop(self):
        cs = ClusterSet([singleton(1), singleton(2), singleton(3)])
        new, merges, splits = update_clusters(cs, graph_of([1, 2, 3], [(1, 2), (2, 3)]))
        assert len(new.clusters) == 1
        assert new.clusters[0].members == frozenset({1, 2, 3})
        assert new.clusters[0].leader == 1
        assert len(merges) == 1 and splits == []

    def test_no_edges_identity(self):
        c1, c2 = singleton(0), singleton(1)
        cs = ClusterSet([c1, c2])
        new, merges, splits = update_clusters(cs, graph_of([0, 1], []))
        assert new.clusters[0] is c1 and new.clusters[1] is c2
        assert merges == [] and splits == []

    def test_pair_plus_single_merge_event(self):
        pair = merge_clusters([singleton(1), singleton(2)])
        cs = ClusterSet([pair, singleton(3)])
        new, merges, _ = update_clusters(cs, graph_of([1, 2, 3], [(2, 3)]))
        assert len(new.clusters) == 1
        assert new.clusters[0].members == frozenset({1, 2, 3})
        assert len(merges) == 1
        assert {c.leader for c in merges[0]} == {1, 3}

    def test_cluster_holds_without_instantaneous_los(self):
        # Robots already in one cluster stay together even with no edge.
        pair = merge_clusters([singleton(5), singleton(6)])
        cs = ClusterSet([pair])
        new, merges, splits = update_clusters(cs, graph_of([5, 6], []))
        assert new.clusters[0] is pair
        assert merges == [] and splits == []

    def test_matches_components_oracle_on_random_graphs(self):
        rng = np.random.default_rng(71)
        for _ in range(60):
            n = int(rng.integers(2, 11))
            nodes = list(range(n))
            edges = [
                (i, j)
                for i in nodes
                for j in nodes
                if i < j and rng.random() < 0.25
            ]
            cs = ClusterSet([singleton(i) for i in nodes])
            new, _, _ = update_clusters(cs, graph_of(nodes, edges))
            got = {c.members for c in new.clusters}
            assert got == graph_components_oracle(nodes, edges)
            # Partition property: every robot in exactly one cluster.
            all_members = [r for c in new.clusters for r in c.members]
            assert sorted(all_members) == nodes

    def test_failed_robot_splits_out(self):
        trio = merge_clusters([singleton(1), singleton(2), singleton(3)])
        cs = ClusterSet([trio])
        new, merges, splits = update_clusters(
            cs, graph_of([1, 2, 3], [(1, 2), (2, 3)]), failed=frozenset({2})
        )
        assert {c.members for c in new.clusters} == {frozenset({1, 3}), frozenset({2})}
        assert len(splits) == 1
        old, parts = splits[0]
        assert old is trio
        assert set(parts) == {frozenset({1, 3}), frozenset({2})}
        assert merges == []

    def test_mismatched_graph_rejected(self):
        cs = ClusterSet([singleton(0)])
        with pytest.raises(ValueError):
            update_clusters(cs, graph_of([0, 1], []))


class TestOnMerge:
    def grid(self):
        rows = ["#" * 120] + ["#" + "." * 118 + "#"] * 118 + ["#" * 120]
        return grid_from_rows(rows)

    def sensed_singleton(self, rid, grid, x, y):
        c = singleton(rid, (grid.height, grid.width))
        c.merged_map = KnownMap.blank(grid)
        integrate_scan(c.merged_map, simulate_lidar(grid, Pose(x, y), 2.0, 90))
        c.trace.append_pose(Pose(x, y), 0.0)
        return c

    def test_disjoint_known_areas_add(self):
        grid = self.grid()
        a = self.sensed_singleton(0, grid, 3.0, 3.0)
        b = self.sensed_singleton(1, grid, 9.0, 9.0)
        merged = on_merge(a, b)
        assert merged.members == frozenset({0, 1})
        assert merged.leader == 0
        assert (
            merged.merged_map.known_cell_count()
            == a.merged_map.known_cell_count() + b.merged_map.known_cell_count()
        )

    def test_subset_map_absorbed(self):
        grid = self.grid()
        a = self.sensed_singleton(0, grid, 3.0, 3.0)
        b = self.sensed_singleton(1, grid, 3.0, 3.0)
        merged = on_merge(a, b)
        assert np.array_equal(merged.merged_map.cells, a.merged_map.cells)

    def test_no_virtuals_stays_empty(self):
        grid = self.grid()
        merged = on_merge(
            self.sensed_singleton(0, grid, 3.0, 3.0),
            self.sensed_singleton(1, grid, 5.0, 5.0),
        )
        assert merged.frontiers.virtual == []
        assert len(merged.frontiers.real) > 0  # joined map still has frontiers

    def test_overlap_rejected(self):
        a = singleton(0)
        with pytest.raises(ValueError):
            on_merge(a, a)


class TestFormationTargets:
    def line(self, n, step=0.1):
        return [Pose(i * step, 0.0) for i in range(n)]

    def test_zero_followers(self):
        assert formation_targets(self.line(5), 0, 1.0) == []

    def test_straight_line_spacing(self):
        hist = self.line(31)  # 3.0 m of arc along +x
        out = formation_targets(hist, 2, 1.0)
        assert out[0].x == pytest.approx(2.0)
        assert out[1].x == pytest.approx(1.0)
        assert out[0].y == out[1].y == 0.0
        assert out[0].heading == pytest.approx(0.0)

    def test_clamp_to_oldest(self):
        hist = self.line(4)  # 0.3 m of history
        out = formation_targets(hist, 3, 1.0)
        assert all(p.x == hist[0].x and p.y == hist[0].y for p in out)

    def test_interpolates_between_poses(self):
        hist = [Pose(0.0, 0.0), Pose(2.0, 0.0)]
        out = formation_targets(hist, 1, 0.5)
        assert out[0].x == pytest.approx(1.5)

    def test_chain_within_comm_range(self):
        # Spacing d/2 keeps adjacent chain members within d.
        rng = np.random.default_rng(77)
        pts = [Pose(0.0, 0.0)]
        heading = 0.0
        for _ in range(300):
            heading += float(rng.normal(0, 0.4))
            pts.append(Pose(pts[-1].x + 0.1 * math.cos(heading), pts[-1].y + 0.1 * math.sin(heading)))
        d = 2.7
        out = formation_targets(pts, 7, d / 2)
        chain = [pts[-1]] + out
        for p, q in zip(chain, chain[1:]):
            assert math.hypot(p.x - q.x, p.y - q.y) <= d + 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            formation_targets(self.line(3), 1, 0.0)
        with pytest.raises(ValueError):
            formation_targets([], 1, 1.0)
