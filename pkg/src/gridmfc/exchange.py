"""Policy evaluation, broadcast and adoption over the communication graph.

After every training iteration each agent scores its freshly updated policy
by running the live system for a fixed number of evaluation steps and
discounting its own rewards (these steps advance the global clock and are
never added to training buffers). Agents then broadcast (score, parameters)
packets; each agent samples one packet to adopt from itself and its current
neighbours, with probability softmax(scores / temperature). With a tiny
temperature this reduces to max-consensus: on a connected static graph all
agents hold the best packet after diameter-many rounds.

The adoption temperature grows linearly over the outer iterations, so early
training spreads the best policies aggressively while later training is
increasingly conservative.
"""

from __future__ import annotations

import csv
from typing import IO, NamedTuple, Protocol, Sequence

import numpy as np

from .learner import QParams
from .netgraph import CommGraph

__all__ = [
    "PolicyPacket",
    "adopt_temperature",
    "adoption_probabilities",
    "adoption_indices",
    "adoption_round",
    "evaluate_policies",
    "run_exchange",
]


class PolicyPacket(NamedTuple):
    sigma: float
    params: QParams


class LiveSystem(Protocol):
    """What the exchange phase needs from the running simulation."""

    def eval_step(self) -> np.ndarray:
        """Advance the live system one step; return per-agent normalised rewards."""

    def comm_graph(self) -> CommGraph:
        """Communication graph snapshot for the current step."""

    def adopt(self, indices: np.ndarray) -> None:
        """Replace each agent's parameters with those of the indexed agent."""


def adopt_temperature(
    k: int, total_iterations: int, start: float = 0.001, end: float = 1.0
) -> float:
    """Linear schedule from ``start`` at k=0 to ``end`` at the final iteration."""
    if not 0 <= k < total_iterations:
        raise ValueError(f"iteration {k} outside [0, {total_iterations})")
    if total_iterations == 1:
        return start
    return start + (end - start) * k / (total_iterations - 1)


def adoption_probabilities(sigmas: np.ndarray, tau: float) -> np.ndarray:
    """softmax(sigmas / tau) with max subtraction; a tiny tau yields an
    indicator on the maximal entries (ties split uniformly)."""
    if tau <= 0.0:
        raise ValueError(f"adoption temperature must be positive, got {tau}")
    z = np.asarray(sigmas, dtype=float)
    e = np.exp((z - z.max()) / tau)
    return e / e.sum()


def adoption_indices(
    sigmas: np.ndarray,
    graph: CommGraph,
    tau: float,
    rngs: Sequence[np.random.Generator],
) -> np.ndarray:
    """For each agent, the index of the agent whose packet it adopts.

    Every agent samples against the same round-start scores, so the draws
    are simultaneous; an isolated agent keeps its own packet.
    """
    n = graph.n
    chosen = np.empty(n, dtype=np.int64)
    for i in range(n):
        candidates = np.concatenate(([i], np.flatnonzero(graph.adjacency[i])))
        probs = adoption_probabilities(sigmas[candidates], tau)
        u = rngs[i].random()
        chosen[i] = candidates[np.searchsorted(np.cumsum(probs), u)]
    return chosen


def adoption_round(
    packets: Sequence[PolicyPacket],
    graph: CommGraph,
    tau: float,
    rngs: Sequence[np.random.Generator],
) -> list[PolicyPacket]:
    """One synchronous broadcast-and-adopt round over packet values."""
    sigmas = np.array([p.sigma for p in packets])
    chosen = adoption_indices(sigmas, graph, tau, rngs)
    return [packets[j] for j in chosen]


def evaluate_policies(system: LiveSystem, eval_steps: int, gamma: float) -> np.ndarray:
    """Discounted sum of each agent's own rewards over the evaluation steps."""
    sigma = None
    for e in range(eval_steps):
        rewards = system.eval_step()
        if sigma is None:
            sigma = np.zeros_like(rewards)
        sigma += gamma**e * rewards
    return sigma if sigma is not None else np.zeros(0)


def run_exchange(
    system: LiveSystem,
    sigmas: np.ndarray,
    rounds: int,
    tau: float,
    rngs: Sequence[np.random.Generator],
    trace: IO[str] | None = None,
) -> np.ndarray:
    """Alternate adoption rounds with live steps; zero rounds is a no-op.

    Each round adopts against the communication graph of the current step,
    then advances the system one step (so positions, and hence the graph,
    move between rounds). Adopted scores are re-broadcast verbatim in later
    rounds; there is no re-evaluation.
    """
    writer = None
    if trace is not None:
        writer = csv.writer(trace)
        writer.writerow(["round", "agent", "adopted_from", "sigma"])
    sigmas = np.asarray(sigmas, dtype=float)
    for round_no in range(rounds):
        chosen = adoption_indices(sigmas, system.comm_graph(), tau, rngs)
        system.adopt(chosen)
        sigmas = sigmas[chosen]
        if writer is not None:
            for i, j in enumerate(chosen):
                writer.writerow([round_no, i, int(j), format(sigmas[i], ".17g")])
        system.eval_step()
    return sigmas
