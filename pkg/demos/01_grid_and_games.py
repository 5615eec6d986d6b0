"""Tour of the grid world and the six cooperative games.

Moves a few agents around, shows the empirical mean field, and evaluates
each game's normalised reward for an agent in different situations.
"""

import numpy as np

from gridmfc.env import (
    Action,
    AgentState,
    Game,
    GameRules,
    GridSpec,
    empirical_mean_field,
    normalize_reward,
    raw_reward,
    transition,
)

grid = GridSpec(10, 10)
print(f"grid {grid.height}x{grid.width}, {grid.num_states} cells, "
      f"corner-to-corner distance {grid.max_dist}")

# Movement clamps at the boundary; staying is a real action.
agent = AgentState(0, 0)
for action in (Action.UP, Action.RIGHT, Action.DOWN, Action.STAY):
    agent = transition(agent, action, grid)
    print(f"after {action.name:5s} -> {agent}")

# A small population and its mean field.
population = [AgentState(0, 0), AgentState(0, 0), AgentState(5, 5), AgentState(9, 9)]
field = empirical_mean_field(population, grid)
print(f"\nmean field over {len(population)} agents: "
      f"mass at (0,0)={field[0]:.2f}, total={field.sum():.2f}")

# How each game pays the agent at (0,0) for staying put.
print("\nnormalised reward for the agent at (0,0), action=STAY:")
for game in Game:
    rules = GameRules.standard(game, grid)
    raw = raw_reward(rules, AgentState(0, 0), Action.STAY, field, grid, len(population))
    value = normalize_reward(rules, raw, grid, len(population))
    kind = "coordination" if game.is_coordination else "anti-coordination"
    print(f"  {game.value:18s} ({kind:17s}) raw={raw:+7.3f} normalised={value:.3f}")

# Moving forfeits the payoff in every stationarity-gated game.
rules = GameRules.standard(Game.DISPERSE, grid)
raw = raw_reward(rules, AgentState(5, 5), Action.LEFT, field, grid, len(population))
print(f"\ndisperse while moving: raw={raw:+.1f} -> "
      f"normalised={normalize_reward(rules, raw, grid, len(population)):.1f}")
