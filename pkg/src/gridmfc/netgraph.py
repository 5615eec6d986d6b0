"""Time-varying communication and state-visibility graphs.

Agents can talk to peers within a broadcast radius of their current cell,
and can see the occupants of cells within a visibility radius of their own
cell. Both radii are fractions of the grid's corner-to-corner Manhattan
distance. The communication graph depends on agent positions and is rebuilt
every environment step; the visibility graph relates cells to cells and is
static for a fixed grid and radius.

Link failures knock out within-radius communication edges independently,
with one Bernoulli draw per unordered pair per step so the graph stays
undirected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import GridSpec

__all__ = [
    "RadiusPolicy",
    "CommGraph",
    "VisGraph",
    "build_comm_graph",
    "build_vis_graph",
    "diameter",
]


@dataclass(frozen=True)
class RadiusPolicy:
    """Broadcast radii (fractions of max grid distance) and link failure rate."""

    comm_radius_frac: float
    vis_radius_frac: float
    link_failure_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in ("comm_radius_frac", "vis_radius_frac", "link_failure_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class CommGraph:
    """Undirected agent-to-agent links: symmetric boolean matrix, no self-edges."""

    adjacency: np.ndarray

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def empty(cls, n: int) -> "CommGraph":
        return cls(np.zeros((n, n), dtype=bool))

    def with_self(self) -> np.ndarray:
        """Adjacency with the diagonal set: who agent i hears, itself included."""
        return self.adjacency | np.eye(self.n, dtype=bool)


@dataclass(frozen=True)
class VisGraph:
    """Cell-to-cell visibility: symmetric boolean matrix, always reflexive."""

    adjacency: np.ndarray

    @property
    def num_states(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def self_only(cls, num_states: int) -> "VisGraph":
        return cls(np.eye(num_states, dtype=bool))


def _pairwise_manhattan(positions: np.ndarray) -> np.ndarray:
    rows = positions[:, 0]
    cols = positions[:, 1]
    return np.abs(rows[:, None] - rows[None, :]) + np.abs(cols[:, None] - cols[None, :])


def build_comm_graph(
    positions: np.ndarray,
    policy: RadiusPolicy,
    grid: GridSpec,
    rng: np.random.Generator,
) -> CommGraph:
    """Link agents within the broadcast radius, then apply link failures.

    One failure draw per unordered pair keeps the graph symmetric.
    """
    n = len(positions)
    dist = _pairwise_manhattan(np.asarray(positions))
    within = dist <= policy.comm_radius_frac * grid.max_dist
    np.fill_diagonal(within, False)
    if policy.link_failure_prob > 0.0 and n > 1:
        iu, ju = np.triu_indices(n, k=1)
        survive = rng.random(len(iu)) >= policy.link_failure_prob
        keep = np.ones((n, n), dtype=bool)
        keep[iu, ju] = survive
        keep[ju, iu] = survive
        within &= keep
    return CommGraph(within)


def build_vis_graph(policy: RadiusPolicy, grid: GridSpec) -> VisGraph:
    """Link cells within the visibility radius; every cell sees itself."""
    idx = np.arange(grid.num_states)
    rows = idx // grid.width
    cols = idx % grid.width
    dist = np.abs(rows[:, None] - rows[None, :]) + np.abs(cols[:, None] - cols[None, :])
    return VisGraph(dist <= policy.vis_radius_frac * grid.max_dist)


def diameter(graph: CommGraph) -> float:
    """Longest shortest-path length, or ``math.inf`` when disconnected."""
    adj = graph.adjacency
    n = adj.shape[0]
    if n <= 1:
        return 0
    longest = 0
    for start in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[start] = True
        frontier = seen.copy()
        hops = 0
        while seen.sum() < n:
            frontier = (frontier @ adj) & ~seen
            if not frontier.any():
                return math.inf
            seen |= frontier
            hops += 1
        longest = max(longest, hops)
    return longest
