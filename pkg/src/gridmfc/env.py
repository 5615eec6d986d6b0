"""Grid world, population games and reward normalisation.

The state space is a rectangular grid of cells. A population of agents moves
on the grid with five actions (the 4-neighbourhood plus "stay"), and every
agent is rewarded through one of six games whose payoffs depend on its own
cell, its action, and the fraction of the population sharing its cell.
Raw game rewards are mapped affinely into [0, 1] using the analytic extrema
of each game's formula, so that downstream learning always sees bounded
rewards.

Scalar functions operate on single agents; the ``*_many`` variants are
vectorised over the whole population and are checked against the scalar
forms in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Action",
    "AgentState",
    "GridSpec",
    "Game",
    "GameRules",
    "InconsistentMeanFieldError",
    "RewardRangeError",
    "transition",
    "transition_many",
    "empirical_mean_field",
    "state_counts",
    "raw_reward",
    "reward_range",
    "normalize_reward",
    "normalized_rewards_many",
]


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


# Row/column displacement per action, indexed by Action value.
_ROW_STEP = np.array([-1, 1, 0, 0, 0], dtype=np.int64)
_COL_STEP = np.array([0, 0, -1, 1, 0], dtype=np.int64)


class AgentState(NamedTuple):
    row: int
    col: int


class InconsistentMeanFieldError(ValueError):
    """The mean field assigns no mass to a cell an agent occupies."""


class RewardRangeError(ValueError):
    """A raw reward fell outside the game's analytic range."""


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid geometry under the Manhattan metric."""

    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")

    @property
    def num_states(self) -> int:
        return self.height * self.width

    @property
    def max_dist(self) -> int:
        # Distance between opposite corners.
        return (self.height - 1) + (self.width - 1)

    def cell_index(self, state: AgentState) -> int:
        return state.row * self.width + state.col

    def cell_state(self, index: int) -> AgentState:
        return AgentState(index // self.width, index % self.width)

    def contains(self, state: AgentState) -> bool:
        return 0 <= state.row < self.height and 0 <= state.col < self.width


def manhattan(a: AgentState, b: AgentState) -> int:
    return abs(a.row - b.row) + abs(a.col - b.col)


class Game(Enum):
    CLUSTER = "cluster"
    TARGET_SELECTION = "target_selection"
    DISPERSE = "disperse"
    TARGET_COVERAGE = "target_coverage"
    BEACH_BAR = "beach_bar"
    SHAPE_FORMATION = "shape_formation"

    @property
    def is_coordination(self) -> bool:
        """Whether the payoff favours aligned rather than diverse behaviour."""
        return self in (Game.CLUSTER, Game.TARGET_SELECTION)


@dataclass(frozen=True)
class GameRules:
    """A game together with its grid-dependent fixtures.

    ``targets`` holds the four corner cells for the target games, the bar
    cell for the beach bar, and the ring centre for shape formation.
    """

    game: Game
    targets: tuple[AgentState, ...] = ()
    ring_radius: int = 0

    @classmethod
    def standard(cls, game: Game, grid: GridSpec) -> "GameRules":
        """Place targets the standard way: corners, or the grid centre."""
        corners = (
            AgentState(0, 0),
            AgentState(0, grid.width - 1),
            AgentState(grid.height - 1, 0),
            AgentState(grid.height - 1, grid.width - 1),
        )
        centre = AgentState(grid.height // 2, grid.width // 2)
        if game in (Game.TARGET_SELECTION, Game.TARGET_COVERAGE):
            return cls(game, targets=corners)
        if game is Game.BEACH_BAR:
            return cls(game, targets=(centre,))
        if game is Game.SHAPE_FORMATION:
            return cls(game, targets=(centre,), ring_radius=3)
        return cls(game)


def transition(state: AgentState, action: Action, grid: GridSpec) -> AgentState:
    """Move one cell in the given direction, clamping at the boundary."""
    row = min(max(state.row + int(_ROW_STEP[action]), 0), grid.height - 1)
    col = min(max(state.col + int(_COL_STEP[action]), 0), grid.width - 1)
    return AgentState(row, col)


def transition_many(positions: np.ndarray, actions: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorised :func:`transition` over an ``(n, 2)`` position array."""
    rows = np.clip(positions[:, 0] + _ROW_STEP[actions], 0, grid.height - 1)
    cols = np.clip(positions[:, 1] + _COL_STEP[actions], 0, grid.width - 1)
    return np.stack([rows, cols], axis=1)


def state_counts(positions: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Occupant count per cell (row-major) for an ``(n, 2)`` position array."""
    flat = positions[:, 0] * grid.width + positions[:, 1]
    return np.bincount(flat, minlength=grid.num_states)


def empirical_mean_field(states: Sequence[AgentState], grid: GridSpec) -> np.ndarray:
    """Fraction of the population in each cell, as a length-``num_states`` vector."""
    if len(states) == 0:
        raise ValueError("mean field needs at least one agent")
    positions = np.array([(s.row, s.col) for s in states], dtype=np.int64)
    return state_counts(positions, grid) / len(states)


def reward_range(rules: GameRules, grid: GridSpec, n: int) -> tuple[float, float]:
    """Analytic ``(min, max)`` of the raw reward for ``n`` agents on ``grid``.

    The occupancy fraction seen by an acting agent lies in [1/n, 1], so the
    log terms span [0, log n]; penalty branches contribute the -1 floor.
    """
    log_n = math.log(n)
    game = rules.game
    if game is Game.CLUSTER:
        return (-log_n, 0.0)
    if game is Game.TARGET_SELECTION:
        return (-1.0, 1.0)
    if game in (Game.DISPERSE, Game.TARGET_COVERAGE, Game.SHAPE_FORMATION):
        return (-1.0, log_n)
    if game is Game.BEACH_BAR:
        return (-1.0, grid.max_dist + log_n)
    raise ValueError(f"unknown game {game}")


def raw_reward(
    rules: GameRules,
    state: AgentState,
    action: Action,
    mean_field: np.ndarray,
    grid: GridSpec,
    n: int,
) -> float:
    """Raw (unnormalised) game reward for one agent.

    ``mean_field`` must assign positive mass to the agent's own cell: the
    acting agent is part of the population it observes.
    """
    occupancy = float(mean_field[grid.cell_index(state)])
    if occupancy <= 0.0:
        raise InconsistentMeanFieldError(
            f"agent at {state} but mean field assigns it mass {occupancy}"
        )
    stay = action == Action.STAY
    game = rules.game

    if game is Game.CLUSTER:
        return math.log(occupancy)
    if game is Game.TARGET_SELECTION:
        # Reward the shared fraction only when co-located with a target
        # alongside at least one other agent; -1 otherwise.
        coord = occupancy if occupancy > 1.0 / n else -1.0
        return coord if state in rules.targets else -1.0
    if game is Game.DISPERSE:
        return -math.log(occupancy) if stay else -1.0
    if game is Game.TARGET_COVERAGE:
        on_target = state in rules.targets
        return -math.log(occupancy) if (stay and on_target) else -1.0
    if game is Game.BEACH_BAR:
        bar = rules.targets[0]
        value = grid.max_dist - manhattan(state, bar) - math.log(occupancy)
        return value if stay else -1.0
    if game is Game.SHAPE_FORMATION:
        centre = rules.targets[0]
        on_ring = manhattan(state, centre) == rules.ring_radius
        return -math.log(occupancy) if (stay and on_ring) else -1.0
    raise ValueError(f"unknown game {game}")


def normalize_reward(rules: GameRules, raw: float, grid: GridSpec, n: int) -> float:
    """Map a raw reward affinely into [0, 1] using the game's analytic range."""
    lo, hi = reward_range(rules, grid, n)
    if raw < lo - 1e-9 or raw > hi + 1e-9:
        raise RewardRangeError(f"raw reward {raw} outside [{lo}, {hi}] for {rules.game}")
    if hi - lo <= 0.0:
        # Degenerate range (cluster with n=1): the only attainable raw value
        # is the maximum, so it normalises to 1.
        return 1.0
    return min(max((raw - lo) / (hi - lo), 0.0), 1.0)


def _raw_rewards_many(
    rules: GameRules,
    positions: np.ndarray,
    actions: np.ndarray,
    mean_field: np.ndarray,
    grid: GridSpec,
    n: int,
) -> np.ndarray:
    cells = positions[:, 0] * grid.width + positions[:, 1]
    occupancy = mean_field[cells]
    if np.any(occupancy <= 0.0):
        bad = int(np.argmax(occupancy <= 0.0))
        raise InconsistentMeanFieldError(
            f"agent {bad} occupies a cell with mean-field mass {occupancy[bad]}"
        )
    stay = actions == Action.STAY
    game = rules.game

    if game is Game.CLUSTER:
        return np.log(occupancy)

    target_cells = np.array([grid.cell_index(t) for t in rules.targets], dtype=np.int64)
    on_target = np.isin(cells, target_cells) if target_cells.size else np.zeros(len(cells), bool)

    if game is Game.TARGET_SELECTION:
        coord = np.where(occupancy > 1.0 / n, occupancy, -1.0)
        return np.where(on_target, coord, -1.0)
    if game is Game.DISPERSE:
        return np.where(stay, -np.log(occupancy), -1.0)
    if game is Game.TARGET_COVERAGE:
        return np.where(stay & on_target, -np.log(occupancy), -1.0)
    if game is Game.BEACH_BAR:
        bar = rules.targets[0]
        dist = np.abs(positions[:, 0] - bar.row) + np.abs(positions[:, 1] - bar.col)
        return np.where(stay, grid.max_dist - dist - np.log(occupancy), -1.0)
    if game is Game.SHAPE_FORMATION:
        centre = rules.targets[0]
        dist = np.abs(positions[:, 0] - centre.row) + np.abs(positions[:, 1] - centre.col)
        return np.where(stay & (dist == rules.ring_radius), -np.log(occupancy), -1.0)
    raise ValueError(f"unknown game {game}")


def normalized_rewards_many(
    rules: GameRules,
    positions: np.ndarray,
    actions: np.ndarray,
    mean_field: np.ndarray,
    grid: GridSpec,
    n: int,
) -> np.ndarray:
    """Vectorised raw reward plus normalisation for the whole population."""
    raw = _raw_rewards_many(rules, positions, actions, mean_field, grid, n)
    lo, hi = reward_range(rules, grid, n)
    if hi - lo <= 0.0:
        return np.ones(len(raw))
    return np.clip((raw - lo) / (hi - lo), 0.0, 1.0)
