"""Non-episodic training loop wiring the environment, graphs, estimators,
learners and policy exchange into one run.

One run executes a fixed number of outer iterations against a single,
never-reset system: collect transitions for some steps, train each learning
agent's Q-network from its freshly filled buffer, then propagate policies
according to the architecture. The global clock advances through every
phase that touches the environment, so a networked run takes
``iterations * (collect + eval + exchange)`` steps while independent and
central-agent runs take ``iterations * collect``.

Architectures:

* networked: agents estimate the global average reward and mean field by
  gossip over a radius-based graph, and spread high-scoring policies by
  softmax adoption.
* central agent: only agent 0 learns; it observes the true mean field and
  true average reward, and pushes its parameters to everyone after each
  iteration (each follower may miss a push with the link failure
  probability, keeping its previous parameters).
* independent: no communication or visibility links at all; agents learn
  from their own rewards and a self-cell-only mean-field estimate.

Per-agent random streams are split from the run seed at construction, so
results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import estimation, exchange, learner
from .env import Game, GameRules, GridSpec, normalized_rewards_many, state_counts, transition_many
from .learner import AdamState, QParams
from .netgraph import CommGraph, RadiusPolicy, VisGraph, build_comm_graph, build_vis_graph

__all__ = [
    "Architecture",
    "AblationFlags",
    "ExperimentConfig",
    "MetricsRow",
    "Simulation",
    "which_learners",
    "reward_signal_mode",
    "observation_mode",
    "resolve_reward_signal",
    "run_training",
]

N_ACTIONS = 5


class Architecture(Enum):
    NETWORKED = "networked"
    CENTRAL_AGENT = "central"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class AblationFlags:
    """Switches for the ablation studies; all off reproduces the standard runs."""

    population_independent_obs: bool = False  # zeros instead of any mean field
    oracle_mean_field: bool = False  # everyone observes the true mean field
    individual_reward_only: bool = False  # everyone trains on its own reward
    oracle_average_reward: bool = False  # everyone trains on the true average
    fixed_adopt_temperature: float | None = None  # constant instead of the linear schedule


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; defaults are the full-scale reference values."""

    height: int = 20
    width: int = 20
    n_agents: int = 500
    game: Game = Game.CLUSTER
    architecture: Architecture = Architecture.NETWORKED
    comm_radius_frac: float = 1.0
    vis_radius_frac: float = 1.0
    link_failure_prob: float = 0.0
    iterations: int = 150  # outer training iterations
    collect_steps: int = 20  # environment steps feeding the buffer per iteration
    train_steps: int = 20  # gradient steps per iteration
    eval_steps: int = 20  # live steps scoring each updated policy
    exchange_rounds: int = 1  # adoption rounds (each takes one live step)
    reward_rounds: int = 1  # gossip rounds for the average-reward estimate
    field_rounds: int = 1  # gossip rounds for the mean-field estimate
    gamma: float = 0.9
    q_temperature: float = 0.03
    batch_size: int = 32
    log_policy_floor: float = -1.0
    target_sync_every: int | None = None  # defaults to train_steps - 1
    learning_rate: float = 0.01
    hidden_width: int = 256
    adopt_temp_start: float = 0.001
    adopt_temp_end: float = 1.0
    ablations: AblationFlags = field(default_factory=AblationFlags)
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.height, self.width)

    @property
    def sync_every(self) -> int:
        if self.target_sync_every is not None:
            return self.target_sync_every
        return max(self.train_steps - 1, 1)

    def adopt_temperature_at(self, k: int) -> float:
        if self.ablations.fixed_adopt_temperature is not None:
            return self.ablations.fixed_adopt_temperature
        return exchange.adopt_temperature(
            k, self.iterations, self.adopt_temp_start, self.adopt_temp_end
        )

    def validate(self) -> None:
        grid = self.grid  # raises on a bad grid
        checks = [
            (self.n_agents >= 1, "population must be at least 1"),
            (self.iterations >= 1, "iterations must be at least 1"),
            (self.collect_steps >= 1, "collect_steps must be at least 1"),
            (self.train_steps >= 0, "train_steps must be nonnegative"),
            (self.eval_steps >= 1, "eval_steps must be at least 1"),
            (self.exchange_rounds >= 0, "exchange_rounds must be nonnegative"),
            (self.reward_rounds >= 1, "reward_rounds must be at least 1"),
            (self.field_rounds >= 0, "field_rounds must be nonnegative"),
            (0.0 < self.gamma < 1.0, "gamma must lie in (0, 1)"),
            (self.q_temperature > 0.0, "q_temperature must be positive"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.log_policy_floor < 0.0, "log_policy_floor must be negative"),
            (self.sync_every >= 1, "target_sync_every must be at least 1"),
            (self.learning_rate > 0.0, "learning_rate must be positive"),
            (self.hidden_width >= 1, "hidden_width must be at least 1"),
            (self.adopt_temp_start > 0.0, "adopt_temp_start must be positive"),
            (self.adopt_temp_end > 0.0, "adopt_temp_end must be positive"),
            (self.checkpoint_every >= 0, "checkpoint_every must be nonnegative"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)
        RadiusPolicy(self.comm_radius_frac, self.vis_radius_frac, self.link_failure_prob)
        abl = self.ablations
        if abl.individual_reward_only and abl.oracle_average_reward:
            raise ValueError(
                "individual_reward_only and oracle_average_reward are mutually exclusive"
            )
        if abl.population_independent_obs and abl.oracle_mean_field:
            raise ValueError(
                "population_independent_obs and oracle_mean_field are mutually exclusive"
            )
        if abl.fixed_adopt_temperature is not None and abl.fixed_adopt_temperature <= 0.0:
            raise ValueError("fixed_adopt_temperature must be positive")
        if self.checkpoint_every > 0 and not self.checkpoint_dir:
            raise ValueError("checkpoint_every needs a checkpoint_dir")
        del grid


@dataclass(frozen=True)
class MetricsRow:
    k: int
    t: int
    v_pop_hat: float
    wall_ms: float


def which_learners(architecture: Architecture, n: int) -> tuple[int, ...]:
    """Indices of agents that run gradient updates."""
    if architecture is Architecture.CENTRAL_AGENT:
        return (0,)
    return tuple(range(n))


def reward_signal_mode(architecture: Architecture, ablations: AblationFlags) -> str:
    """Which reward each agent stores in its buffer: own, estimated or oracle."""
    if ablations.individual_reward_only:
        return "own"
    if ablations.oracle_average_reward:
        return "oracle"
    if architecture is Architecture.CENTRAL_AGENT:
        return "oracle"
    return "estimated"


def observation_mode(architecture: Architecture, ablations: AblationFlags) -> str:
    """Which mean field enters observations: zeros, true or estimated."""
    if ablations.population_independent_obs:
        return "zeros"
    if ablations.oracle_mean_field or architecture is Architecture.CENTRAL_AGENT:
        return "true"
    return "estimated"


def resolve_reward_signal(
    architecture: Architecture,
    ablations: AblationFlags,
    own,
    estimated,
    oracle,
):
    mode = reward_signal_mode(architecture, ablations)
    return {"own": own, "estimated": estimated, "oracle": oracle}[mode]


class Simulation:
    """Mutable state of one run; see :func:`run_training` for the loop."""

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.cfg = config
        self.grid = config.grid
        self.rules = GameRules.standard(config.game, self.grid)
        self.radius_policy = RadiusPolicy(
            config.comm_radius_frac, config.vis_radius_frac, config.link_failure_prob
        )
        n = config.n_agents

        # Fixed stream layout: positions, graph failures, central pushes,
        # then per agent (init, act, train, adopt).
        root = np.random.SeedSequence(config.seed)
        ss_pos, ss_graph, ss_push, ss_agents = root.spawn(4)
        self.rng_graph = np.random.default_rng(ss_graph)
        self.rng_push = np.random.default_rng(ss_push)
        per_agent = [seq.spawn(4) for seq in ss_agents.spawn(n)]
        rng_init = [np.random.default_rng(s[0]) for s in per_agent]
        self.rng_act = [np.random.default_rng(s[1]) for s in per_agent]
        self.rng_train = [np.random.default_rng(s[2]) for s in per_agent]
        self.rng_adopt = [np.random.default_rng(s[3]) for s in per_agent]

        rng_pos = np.random.default_rng(ss_pos)
        self.positions = np.stack(
            [
                rng_pos.integers(0, self.grid.height, size=n),
                rng_pos.integers(0, self.grid.width, size=n),
            ],
            axis=1,
        )

        in_dim = self.grid.height + self.grid.width + self.grid.num_states
        self.params = QParams.init_stacked(rng_init, in_dim, config.hidden_width, N_ACTIONS)
        self.learner_indices = which_learners(config.architecture, n)
        self._learner_slice = (
            slice(0, 1) if config.architecture is Architecture.CENTRAL_AGENT else slice(None)
        )
        learner_view = self.params.view(self._learner_slice)
        self.target = learner_view.copy()
        self.opt = AdamState.for_params(learner_view, lr=config.learning_rate)

        if config.architecture is Architecture.INDEPENDENT:
            self.vis = VisGraph.self_only(self.grid.num_states)
        elif config.architecture is Architecture.CENTRAL_AGENT:
            self.vis = None  # observations use the true mean field
        else:
            self.vis = build_vis_graph(self.radius_policy, self.grid)

        self.t = 0
        self._snapshot_t = -1
        self._comm: CommGraph | None = None
        self._obs: np.ndarray | None = None
        self._mf_true: np.ndarray | None = None
        self._pending: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

        self._buf_obs = np.zeros((n, config.collect_steps, in_dim))
        self._buf_act = np.zeros((n, config.collect_steps), dtype=np.int64)
        self._buf_rew = np.zeros((n, config.collect_steps))
        self._buf_next = np.zeros((n, config.collect_steps, in_dim))
        self._buf_fill = 0

    # -- per-step snapshot ------------------------------------------------

    def _refresh(self) -> None:
        """Build the graphs, true mean field and observations for the current
        step; one snapshot (and one failure draw) per clock value."""
        if self._snapshot_t == self.t:
            return
        cfg = self.cfg
        n = cfg.n_agents
        counts = state_counts(self.positions, self.grid)
        self._mf_true = counts / n

        arch = cfg.architecture
        if arch is Architecture.CENTRAL_AGENT:
            self._comm = None
        elif arch is Architecture.INDEPENDENT:
            self._comm = CommGraph.empty(n)
        else:
            self._comm = build_comm_graph(
                self.positions, self.radius_policy, self.grid, self.rng_graph
            )

        mode = observation_mode(arch, cfg.ablations)
        if mode == "zeros":
            rows = None
        elif mode == "true":
            rows = np.broadcast_to(self._mf_true, (n, self.grid.num_states))
        else:
            rows = estimation.estimate_mean_field(
                self.positions, self.vis, self._comm, cfg.field_rounds, self.grid
            )
        self._obs = learner.encode_observations(self.positions, rows, self.grid)
        self._snapshot_t = self.t

    def _observations(self) -> np.ndarray:
        """Current observations; completes the previous step's pending
        transition now that its next observation exists."""
        self._refresh()
        if self._pending is not None:
            obs, actions, signal = self._pending
            i = self._buf_fill
            if i >= self.cfg.collect_steps:
                raise RuntimeError("buffer overflow: more transitions than collect steps")
            self._buf_obs[:, i] = obs
            self._buf_act[:, i] = actions
            self._buf_rew[:, i] = signal
            self._buf_next[:, i] = self._obs
            self._buf_fill = i + 1
            self._pending = None
        return self._obs

    def _sample_actions(self, obs: np.ndarray) -> np.ndarray:
        qvals = learner.q_forward(self.params, obs[:, None, :])[:, 0, :]
        cumulative = np.cumsum(learner.policy_from_q(qvals, self.cfg.q_temperature), axis=1)
        n = self.cfg.n_agents
        actions = np.empty(n, dtype=np.int64)
        for i in range(n):
            actions[i] = min(
                np.searchsorted(cumulative[i], self.rng_act[i].random()), N_ACTIONS - 1
            )
        return actions

    def _step(self, collect: bool) -> np.ndarray:
        """One environment step for the whole population; returns each
        agent's normalised true reward."""
        cfg = self.cfg
        obs = self._observations()
        actions = self._sample_actions(obs)
        rewards = normalized_rewards_many(
            self.rules, self.positions, actions, self._mf_true, self.grid, cfg.n_agents
        )
        if collect:
            mode = reward_signal_mode(cfg.architecture, cfg.ablations)
            estimated = (
                estimation.estimate_average_reward(rewards, self._comm, cfg.reward_rounds)
                if mode == "estimated"
                else None
            )
            oracle = np.full(cfg.n_agents, rewards.mean())
            signal = resolve_reward_signal(
                cfg.architecture, cfg.ablations, rewards, estimated, oracle
            )
            self._pending = (obs, actions, signal)
        self.positions = transition_many(self.positions, actions, self.grid)
        self.t += 1
        return rewards

    # -- LiveSystem protocol for the exchange phase -----------------------

    def eval_step(self) -> np.ndarray:
        return self._step(collect=False)

    def comm_graph(self) -> CommGraph:
        self._refresh()
        return self._comm

    def adopt(self, indices: np.ndarray) -> None:
        for arr in self.params.arrays():
            arr[...] = arr[indices]

    # -- phases ------------------------------------------------------------

    def _clear_buffers(self) -> None:
        self._buf_fill = 0
        self._pending = None

    def _collect_phase(self) -> float:
        value = 0.0
        for m in range(self.cfg.collect_steps):
            rewards = self._step(collect=True)
            value += self.cfg.gamma**m * float(rewards.mean())
        return value

    def _train_phase(self) -> None:
        cfg = self.cfg
        self._observations()  # completes the final collected transition
        if self._buf_fill != cfg.collect_steps:
            raise RuntimeError(
                f"expected {cfg.collect_steps} buffered transitions, got {self._buf_fill}"
            )
        if cfg.train_steps == 0:
            return
        sl = self._learner_slice
        buf_obs = self._buf_obs[sl]
        buf_act = self._buf_act[sl]
        buf_rew = self._buf_rew[sl]
        buf_next = self._buf_next[sl]
        params = self.params.view(sl)
        for l in range(cfg.train_steps):
            idx = np.stack(
                [
                    self.rng_train[i].integers(0, cfg.collect_steps, size=cfg.batch_size)
                    for i in self.learner_indices
                ]
            )
            rows = np.arange(len(self.learner_indices))[:, None]
            learner.train_step(
                params,
                self.target,
                self.opt,
                buf_obs[rows, idx],
                buf_act[rows, idx],
                buf_rew[rows, idx],
                buf_next[rows, idx],
                cfg.q_temperature,
                cfg.gamma,
                cfg.log_policy_floor,
            )
            if l % cfg.sync_every == 0:
                self.target.assign(params)

    def _propagate_phase(self, k: int) -> None:
        cfg = self.cfg
        arch = cfg.architecture
        if arch is Architecture.NETWORKED:
            sigma = exchange.evaluate_policies(self, cfg.eval_steps, cfg.gamma)
            exchange.run_exchange(
                self, sigma, cfg.exchange_rounds, cfg.adopt_temperature_at(k), self.rng_adopt
            )
        elif arch is Architecture.CENTRAL_AGENT and cfg.n_agents > 1:
            followers = np.arange(1, cfg.n_agents)
            if cfg.link_failure_prob > 0.0:
                received = self.rng_push.random(len(followers)) >= cfg.link_failure_prob
                followers = followers[received]
            for arr in self.params.arrays():
                arr[followers] = arr[0]

    def _maybe_checkpoint(self, k: int) -> None:
        cfg = self.cfg
        if cfg.checkpoint_every <= 0 or (k + 1) % cfg.checkpoint_every:
            return
        directory = Path(cfg.checkpoint_dir)
        directory.mkdir(parents=True, exist_ok=True)
        learner.save_params_text(self.params, directory / f"params_k{k:05d}.txt")

    def run(self) -> list[MetricsRow]:
        rows = []
        for k in range(self.cfg.iterations):
            started = time.perf_counter()
            self._clear_buffers()
            value = self._collect_phase()
            self._train_phase()
            self._propagate_phase(k)
            self._maybe_checkpoint(k)
            rows.append(
                MetricsRow(
                    k=k,
                    t=self.t,
                    v_pop_hat=value,
                    wall_ms=(time.perf_counter() - started) * 1e3,
                )
            )
        return rows


def run_training(config: ExperimentConfig) -> tuple[list[MetricsRow], QParams]:
    """Run one full training; returns the per-iteration metrics and the
    final stacked parameters of all agents."""
    sim = Simulation(config)
    rows = sim.run()
    return rows, sim.params


def desk_config(**overrides) -> ExperimentConfig:
    """Small, documented preset used by the acceptance experiments: a 10x10
    grid with 50 agents and 50 iterations, and the hidden width scaled down
    with the input size (largest power of two below it)."""
    base = ExperimentConfig(
        height=10, width=10, n_agents=50, iterations=50, hidden_width=64
    )
    return replace(base, **overrides)
