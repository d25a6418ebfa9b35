import numpy as np
import pytest

from fbrsim.frontier import (
    REAL,
    VIRTUAL,
    Frontier,
    FrontierSet,
    extract_frontiers,
    frontier_score,
    select_frontier,
    select_frontier_with_path,
)
from fbrsim.gridworld import plan_path
from fbrsim.perception import KnownMap

from conftest import random_known_cells
from oracles import FREE, components_oracle, frontier_cells_oracle
from test_gridworld import known_from_rows


class TestExtractFrontiers:
    def test_single_free_cell_surrounded_by_unknown(self):
        known = known_from_rows(["   ", " . ", "   "])
        fronts = extract_frontiers(known, min_cells=1)
        assert len(fronts) == 1
        f = fronts[0]
        assert f.kind == REAL
        assert set(f.cells) == {(1, 1)}
        assert f.target == (1, 1)
        assert f.length_m == pytest.approx(0.1)

    def test_no_unknown_cells(self):
        known = known_from_rows(["...", ".#."])
        assert extract_frontiers(known, min_cells=1) == []

    def test_no_free_cells(self):
        known = known_from_rows(["## ", "#  "])
        assert extract_frontiers(known, min_cells=1) == []

    def test_min_cells_filter(self):
        # Two frontier groups: a single cell and a 3-cell line.
        known = known_from_rows([".#...", "     "])
        assert len(extract_frontiers(known, min_cells=1)) == 2
        fronts = extract_frontiers(known, min_cells=3)
        assert len(fronts) == 1
        assert len(fronts[0].cells) == 3

    def test_min_cells_validation(self):
        known = known_from_rows(["."])
        with pytest.raises(ValueError):
            extract_frontiers(known, min_cells=0)

    def test_matches_brute_force_on_random_maps(self):
        rng = np.random.default_rng(51)
        for _ in range(40):
            h, w = int(rng.integers(3, 30)), int(rng.integers(3, 30))
            known = KnownMap(0.1, random_known_cells(rng, w, h))
            fronts = extract_frontiers(known, min_cells=1)
            got = {frozenset(f.cells) for f in fronts}
            expected = components_oracle(frontier_cells_oracle(known.cells))
            assert got == expected

    def test_cells_partition(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            known = KnownMap(0.1, random_known_cells(rng, 25, 25))
            fronts = extract_frontiers(known, min_cells=1)
            seen = set()
            for f in fronts:
                assert not (set(f.cells) & seen)
                seen.update(f.cells)

    def test_target_is_free_member_snap(self):
        # C-shaped frontier whose centroid falls on a non-member cell.
        known = known_from_rows(["...", ".# ", "...", "   "])
        fronts = extract_frontiers(known, min_cells=1)
        for f in fronts:
            assert f.target in f.cells
            assert known.is_free(f.target)


class TestFrontierScore:
    def make(self, length_m):
        return Frontier(0, REAL, ((0, 0),), (0, 0), length_m)

    def test_paper_arithmetic(self):
        assert frontier_score(self.make(8.0), 4.0, 0.25) == -1.0

    def test_alpha_one_ignores_distance(self):
        f = self.make(3.7)
        assert frontier_score(f, 100.0, 1.0) == 3.7
        assert frontier_score(f, 0.0, 1.0) == 3.7

    def test_closer_scores_higher(self):
        f = self.make(5.0)
        assert frontier_score(f, 2.0, 0.25) > frontier_score(f, 5.0, 0.25)

    def test_scale_invariance_of_argmax(self):
        # theta is homogeneous of degree 1: scaling lengths and distances by
        # the same factor preserves the ordering.
        fa, da = self.make(8.0), 4.0
        fb, db = self.make(2.0), 1.0
        for k in (0.5, 2.0, 10.0):
            ska = frontier_score(self.make(8.0 * k), da * k, 0.25)
            skb = frontier_score(self.make(2.0 * k), db * k, 0.25)
            assert (ska > skb) == (frontier_score(fa, da, 0.25) > frontier_score(fb, db, 0.25))
            assert ska == pytest.approx(k * frontier_score(fa, da, 0.25))

    def test_validation(self):
        with pytest.raises(ValueError):
            frontier_score(self.make(1.0), 1.0, 1.5)
        with pytest.raises(ValueError):
            frontier_score(self.make(1.0), 1.0, -0.1)
        with pytest.raises(ValueError):
            frontier_score(self.make(1.0), -1.0, 0.5)


class TestSelectFrontier:
    def corridor(self, n=60):
        return known_from_rows(["." * n])

    def test_singleton(self):
        known = self.corridor()
        f = Frontier(7, REAL, ((20, 0),), (20, 0), 0.5)
        sel = select_frontier(FrontierSet([f]), (0, 0), known, 0.25)
        assert sel is f

    def test_small_near_beats_large_far(self):
        # len 8 / dist 4 scores -1.0; len 2 / dist 1 scores -0.25.
        known = self.corridor()
        far = Frontier(0, REAL, ((40, 0),), (40, 0), 8.0)
        near = Frontier(1, VIRTUAL, ((10, 0),), (10, 0), 2.0)
        sel, path = select_frontier_with_path(FrontierSet([far], [near]), (0, 0), known, 0.25)
        assert sel is near
        assert path.length == pytest.approx(1.0)

    def test_unreachable_discarded(self):
        known = known_from_rows(["...#.."])
        blocked = Frontier(0, REAL, ((5, 0),), (5, 0), 10.0)
        open_f = Frontier(1, REAL, ((2, 0),), (2, 0), 0.3)
        sel = select_frontier(FrontierSet([blocked, open_f]), (0, 0), known, 0.25)
        assert sel is open_f

    def test_all_unreachable_returns_none(self):
        known = known_from_rows(["...#.."])
        blocked = Frontier(0, REAL, ((5, 0),), (5, 0), 10.0)
        assert select_frontier(FrontierSet([blocked]), (0, 0), known, 0.25) is None
        assert select_frontier(FrontierSet(), (0, 0), known, 0.25) is None

    def test_tie_breaks_distance_then_id(self):
        known = self.corridor()
        # Same length, same distance: lower id wins.
        a = Frontier(5, REAL, ((10, 0),), (10, 0), 1.0)
        b = Frontier(2, REAL, ((10, 0),), (10, 0), 1.0)
        assert select_frontier(FrontierSet([a, b]), (0, 0), known, 0.25) is b
        # Same score via equal length, nearer target wins.
        c = Frontier(9, REAL, ((10, 0),), (10, 0), 1.0)
        d = Frontier(8, REAL, ((12, 0),), (12, 0), 1.0)
        assert select_frontier(FrontierSet([c, d]), (0, 0), known, 0.25) is c

    def test_robot_cell_must_be_free(self):
        known = known_from_rows([" ..."])
        with pytest.raises(ValueError):
            select_frontier(FrontierSet(), (0, 0), known, 0.25)

    def test_selected_target_always_reachable(self):
        rng = np.random.default_rng(61)
        for _ in range(20):
            h, w = int(rng.integers(5, 25)), int(rng.integers(5, 25))
            cells = np.where(rng.random((h, w)) < 0.35, 0, 1).astype(np.uint8)
            known = KnownMap(0.1, cells)
            fronts = extract_frontiers(known, min_cells=1)
            free = np.argwhere(cells == FREE)
            if not len(free) or not fronts:
                continue
            cy, cx = free[rng.integers(len(free))]
            sel = select_frontier(FrontierSet(fronts), (int(cx), int(cy)), known, 0.25)
            if sel is not None:
                assert plan_path(known, (int(cx), int(cy)), sel.target) is not None

    def test_dist_equals_plan_path_length(self):
        rng = np.random.default_rng(67)
        known = KnownMap(0.1, np.where(rng.random((20, 20)) < 0.2, 2, 1).astype(np.uint8))
        free = np.argwhere(known.cells == FREE)
        cy, cx = free[0]
        robot = (int(cx), int(cy))
        fronts = [
            Frontier(i, REAL, ((int(x), int(y)),), (int(x), int(y)), 0.1)
            for i, (y, x) in enumerate(free[1:40])
        ]
        sel, path = select_frontier_with_path(FrontierSet(fronts), robot, known, 0.25) or (None, None)
        if sel is not None:
            assert path.length == plan_path(known, robot, sel.target).length
