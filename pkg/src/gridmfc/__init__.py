"""Online learning of cooperative grid-population behaviour from a single
non-episodic run, under networked, central-agent and independent
architectures."""

from .env import Action, AgentState, Game, GameRules, GridSpec
from .netgraph import CommGraph, RadiusPolicy, VisGraph
from .orchestrator import (
    AblationFlags,
    Architecture,
    ExperimentConfig,
    MetricsRow,
    Simulation,
    desk_config,
    run_training,
)

__all__ = [
    "Action",
    "AgentState",
    "Game",
    "GameRules",
    "GridSpec",
    "CommGraph",
    "RadiusPolicy",
    "VisGraph",
    "AblationFlags",
    "Architecture",
    "ExperimentConfig",
    "MetricsRow",
    "Simulation",
    "desk_config",
    "run_training",
]

__version__ = "0.1.0"
