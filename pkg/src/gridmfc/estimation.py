"""Gossip estimators for the global average reward and the global mean field.

Both protocols run a fixed number of synchronous broadcast rounds over the
current communication graph snapshot.

Average reward: every agent starts with the set {(own id, own reward)},
repeatedly unions in its neighbours' sets (the id key makes double counting
impossible), and finally averages whatever it has collected. After ``r``
rounds an agent has exactly the rewards of the agents within ``r`` hops.

Mean field: every agent starts by counting the occupants of each cell
visible from its own cell, leaving the rest unknown. Each round it fills
unknown entries with any neighbour's known entries (counts are exact, so
conflicting values cannot occur). Agents know the population size, so the
still-uncounted remainder is spread uniformly over the still-unknown cells
before dividing by the population size.

The membership/known-mask state is held as boolean matrices; a boolean
matrix product against the (self-inclusive) adjacency is exactly one round
of id-keyed set union.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, NamedTuple

import numpy as np

from .env import GridSpec
from .netgraph import CommGraph, VisGraph

__all__ = [
    "RewardPacket",
    "RewardSet",
    "CountVector",
    "ProtocolError",
    "reward_membership",
    "estimate_average_reward",
    "field_known_masks",
    "estimate_mean_field",
]


class ProtocolError(RuntimeError):
    """A gossip invariant was violated (e.g. counts exceeding the population)."""


class RewardPacket(NamedTuple):
    agent_id: int
    reward: float


@dataclass(frozen=True)
class RewardSet:
    """An agent's collection of reward packets, keyed by agent id."""

    members: np.ndarray  # bool, length n: which agents' packets are present
    rewards: np.ndarray  # shared reward vector, length n

    def __len__(self) -> int:
        return int(self.members.sum())

    def packets(self) -> list[RewardPacket]:
        return [RewardPacket(int(i), float(self.rewards[i])) for i in np.flatnonzero(self.members)]

    @property
    def estimate(self) -> float:
        return float(self.rewards[self.members].mean())


class CountVector(NamedTuple):
    """Per-cell occupant counts with an explicit known/unknown mask."""

    counts: np.ndarray  # int, length num_states; meaningful only where known
    known: np.ndarray  # bool, length num_states


def reward_membership(graph: CommGraph, rounds: int) -> np.ndarray:
    """Membership matrix after the union rounds: entry (i, j) means agent i
    holds agent j's packet. Row i covers exactly the ``rounds``-hop ball."""
    if rounds < 1:
        raise ValueError(f"need at least one communication round, got {rounds}")
    member = np.eye(graph.n, dtype=bool)
    reach = graph.with_self()
    for _ in range(rounds):
        member = reach @ member
    return member


def estimate_average_reward(
    rewards: np.ndarray,
    graph: CommGraph,
    rounds: int,
    trace: IO[str] | None = None,
) -> np.ndarray:
    """Each agent's average over the reward packets it collected.

    An isolated agent ends up averaging only its own reward. ``trace``
    optionally receives per-round set sizes as CSV rows (round, agent, size).
    """
    rewards = np.asarray(rewards, dtype=float)
    if trace is None:
        member = reward_membership(graph, rounds)
    else:
        writer = csv.writer(trace)
        writer.writerow(["round", "agent", "set_size"])
        member = np.eye(graph.n, dtype=bool)
        reach = graph.with_self()
        for round_no in range(1, rounds + 1):
            member = reach @ member
            for i, size in enumerate(member.sum(axis=1)):
                writer.writerow([round_no, i, int(size)])
    counts = member.sum(axis=1)
    return (member @ rewards) / counts


def collect_reward_sets(rewards: np.ndarray, graph: CommGraph, rounds: int) -> list[RewardSet]:
    """The final per-agent reward sets, for inspection and protocol tests."""
    rewards = np.asarray(rewards, dtype=float)
    member = reward_membership(graph, rounds)
    return [RewardSet(member[i], rewards) for i in range(graph.n)]


def field_known_masks(
    positions: np.ndarray,
    vis: VisGraph,
    comm: CommGraph,
    rounds: int,
    grid: GridSpec,
) -> np.ndarray:
    """Which cells each agent knows the exact count of after the merge rounds."""
    if rounds < 0:
        raise ValueError(f"communication rounds must be >= 0, got {rounds}")
    cells = positions[:, 0] * grid.width + positions[:, 1]
    known = vis.adjacency[cells]  # (n, num_states)
    if rounds > 0:
        reach = comm.with_self()
        for _ in range(rounds):
            known = reach @ known
    return known


def estimate_mean_field(
    positions: np.ndarray,
    vis: VisGraph,
    comm: CommGraph,
    rounds: int,
    grid: GridSpec,
) -> np.ndarray:
    """Per-agent mean-field estimates, one row per agent.

    Known cells carry their exact occupancy fraction; the uncounted part of
    the population is spread uniformly over the unknown cells. Every row
    sums to 1.
    """
    positions = np.asarray(positions)
    n = len(positions)
    occupancy = np.bincount(
        positions[:, 0] * grid.width + positions[:, 1], minlength=grid.num_states
    )
    known = field_known_masks(positions, vis, comm, rounds, grid)
    counted = known @ occupancy
    if np.any(counted > n):
        raise ProtocolError("known counts exceed the population size")
    unseen = grid.num_states - known.sum(axis=1)
    uncounted = n - counted
    fill = np.divide(
        uncounted, n * unseen, out=np.zeros(n, dtype=float), where=unseen > 0
    )
    estimate = np.where(known, occupancy[None, :] / n, fill[:, None])
    return estimate


def initial_count_vectors(
    positions: np.ndarray, vis: VisGraph, grid: GridSpec
) -> list[CountVector]:
    """Each agent's pre-communication count vector (visibility counts only)."""
    positions = np.asarray(positions)
    occupancy = np.bincount(
        positions[:, 0] * grid.width + positions[:, 1], minlength=grid.num_states
    )
    cells = positions[:, 0] * grid.width + positions[:, 1]
    return [
        CountVector(np.where(vis.adjacency[c], occupancy, 0), vis.adjacency[c].copy())
        for c in cells
    ]
