import math

import numpy as np
import pytest

from gridmfc.env import GridSpec
from gridmfc.netgraph import (
    CommGraph,
    RadiusPolicy,
    VisGraph,
    build_comm_graph,
    build_vis_graph,
    diameter,
)


def comm(positions, frac, failure=0.0, grid=GridSpec(10, 10), seed=0):
    policy = RadiusPolicy(frac, frac, failure)
    return build_comm_graph(np.array(positions), policy, grid, np.random.default_rng(seed))


class TestCommGraph:
    def test_full_radius_gives_complete_graph(self):
        rng = np.random.default_rng(3)
        positions = np.stack([rng.integers(0, 10, 8), rng.integers(0, 10, 8)], axis=1)
        g = comm(positions, 1.0)
        expected = ~np.eye(8, dtype=bool)
        assert np.array_equal(g.adjacency, expected)

    def test_zero_radius_links_only_colocated(self):
        g = comm([(2, 2), (2, 2), (5, 5)], 0.0)
        assert g.adjacency[0, 1] and g.adjacency[1, 0]
        assert not g.adjacency[0, 2] and not g.adjacency[1, 2]
        assert not g.adjacency.diagonal().any()

    def test_line_of_three_links_closest_pair_only(self):
        # Distances a-b = 1, b-c = 2; a radius covering distance 1 keeps only a-b.
        grid = GridSpec(1, 10)  # max_dist 9
        g = comm([(0, 0), (0, 1), (0, 3)], 1 / 9, grid=grid)
        assert g.adjacency[0, 1]
        assert not g.adjacency[1, 2] and not g.adjacency[0, 2]

    def test_symmetry_under_failures(self):
        rng = np.random.default_rng(11)
        for seed in range(20):
            positions = np.stack([rng.integers(0, 10, 12), rng.integers(0, 10, 12)], axis=1)
            g = comm(positions, 1.0, failure=0.5, seed=seed)
            assert np.array_equal(g.adjacency, g.adjacency.T)
            assert not g.adjacency.diagonal().any()

    def test_radius_monotonicity_without_failures(self):
        rng = np.random.default_rng(5)
        positions = np.stack([rng.integers(0, 10, 15), rng.integers(0, 10, 15)], axis=1)
        previous = comm(positions, 0.0).adjacency
        for frac in (0.2, 0.4, 0.6, 0.8, 1.0):
            current = comm(positions, frac).adjacency
            assert np.all(previous <= current)
            previous = current

    def test_failure_survival_rate(self):
        # ~1e5 within-radius pairs in one step; survival should be 0.10 +- 0.01.
        n = 450
        positions = np.zeros((n, 2), dtype=np.int64)
        g = comm(positions, 1.0, failure=0.9, seed=42)
        pairs = n * (n - 1) / 2
        survived = g.adjacency.sum() / 2
        assert survived / pairs == pytest.approx(0.10, abs=0.01)

    def test_forced_empty_graphs(self):
        g = CommGraph.empty(6)
        assert not g.adjacency.any()
        v = VisGraph.self_only(9)
        assert np.array_equal(v.adjacency, np.eye(9, dtype=bool))


class TestVisGraph:
    def test_full_radius_sees_everything(self):
        grid = GridSpec(4, 4)
        v = build_vis_graph(RadiusPolicy(1.0, 1.0), grid)
        assert v.adjacency.all()

    def test_zero_radius_sees_only_self(self):
        grid = GridSpec(4, 4)
        v = build_vis_graph(RadiusPolicy(1.0, 0.0), grid)
        assert np.array_equal(v.adjacency, np.eye(16, dtype=bool))

    def test_radius_two_neighbourhood_on_4x4(self):
        grid = GridSpec(4, 4)  # max_dist 6; frac 2/6 covers distance <= 2
        v = build_vis_graph(RadiusPolicy(1.0, 2 / 6), grid)
        visible = {grid.cell_state(i) for i in np.flatnonzero(v.adjacency[0])}
        assert visible == {(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)}

    def test_reflexive_and_symmetric(self):
        grid = GridSpec(5, 3)
        for frac in (0.0, 0.3, 0.7, 1.0):
            v = build_vis_graph(RadiusPolicy(1.0, frac), grid)
            assert v.adjacency.diagonal().all()
            assert np.array_equal(v.adjacency, v.adjacency.T)


class TestDiameter:
    def test_complete_graph(self):
        g = CommGraph(~np.eye(5, dtype=bool))
        assert diameter(g) == 1

    def test_path_graph(self):
        adj = np.zeros((4, 4), dtype=bool)
        for i in range(3):
            adj[i, i + 1] = adj[i + 1, i] = True
        assert diameter(CommGraph(adj)) == 3

    def test_disconnected_is_infinite(self):
        adj = np.zeros((4, 4), dtype=bool)
        adj[0, 1] = adj[1, 0] = True
        adj[2, 3] = adj[3, 2] = True
        assert diameter(CommGraph(adj)) == math.inf

    def test_singleton(self):
        assert diameter(CommGraph.empty(1)) == 0


class TestRadiusPolicy:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RadiusPolicy(1.2, 0.5)
        with pytest.raises(ValueError):
            RadiusPolicy(0.5, -0.1)
        with pytest.raises(ValueError):
            RadiusPolicy(0.5, 0.5, 1.5)
