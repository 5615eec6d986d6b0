"""Per-agent function approximation: Q-network, loss, optimiser and buffer.

Each agent owns a two-hidden-layer ReLU network mapping its observation
(row one-hot + column one-hot + mean-field vector) to one value per action.
Policies are softmax(Q / tau) of the network output. Training minimises a
squared error against a regularised target: the reward plus a clipped
log-policy bonus for the taken action plus the discounted soft value of the
next observation, all evaluated under a periodically synced target copy of
the network.

Everything here is plain numpy with hand-written backpropagation. All array
functions are dimension-polymorphic: parameters may carry a leading agent
axis, in which case a whole population is processed in one call (batched
matmuls), with results identical to looping agent by agent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .env import GridSpec

__all__ = [
    "QParams",
    "AdamState",
    "Transition",
    "ReplayBuffer",
    "encode_observation",
    "encode_observations",
    "q_forward",
    "policy_from_q",
    "scaled_log_policy",
    "munchausen_targets",
    "loss_and_grads",
    "adam_step",
    "train_step",
    "sync_target",
    "save_params_text",
    "load_params_text",
]

_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")


def encode_observation(state, mean_field, grid: GridSpec) -> np.ndarray:
    """Concatenate row one-hot, column one-hot and the flattened mean field.

    ``mean_field`` may be None for the population-independent ablation, in
    which case the mean-field slot is all zeros.
    """
    out = np.zeros(grid.height + grid.width + grid.num_states)
    out[state[0]] = 1.0
    out[grid.height + state[1]] = 1.0
    if mean_field is not None:
        out[grid.height + grid.width :] = mean_field
    return out


def encode_observations(
    positions: np.ndarray, mean_fields: np.ndarray | None, grid: GridSpec
) -> np.ndarray:
    """Vectorised :func:`encode_observation`; ``mean_fields`` has one row per agent."""
    n = len(positions)
    out = np.zeros((n, grid.height + grid.width + grid.num_states))
    out[np.arange(n), positions[:, 0]] = 1.0
    out[np.arange(n), grid.height + positions[:, 1]] = 1.0
    if mean_fields is not None:
        out[:, grid.height + grid.width :] = mean_fields
    return out


@dataclass
class QParams:
    """Weights and biases of the Q-network (optionally stacked over agents).

    Single-agent arrays are 2-D/1-D; stacked arrays carry a leading agent
    axis. All operations broadcast over that axis.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @classmethod
    def init(
        cls, rng: np.random.Generator, in_dim: int, hidden: int, n_actions: int
    ) -> "QParams":
        """Uniform init scaled by fan-in, per layer."""

        def layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
            bound = 1.0 / np.sqrt(fan_in)
            return (
                rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                rng.uniform(-bound, bound, size=fan_out),
            )

        w1, b1 = layer(in_dim, hidden)
        w2, b2 = layer(hidden, hidden)
        w3, b3 = layer(hidden, n_actions)
        return cls(w1, b1, w2, b2, w3, b3)

    @classmethod
    def init_stacked(
        cls,
        rngs: Sequence[np.random.Generator],
        in_dim: int,
        hidden: int,
        n_actions: int,
    ) -> "QParams":
        """One independently initialised network per agent, stacked."""
        per_agent = [cls.init(rng, in_dim, hidden, n_actions) for rng in rngs]
        return cls(
            *(np.stack([getattr(p, name) for p in per_agent]) for name in _FIELDS)
        )

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in _FIELDS)

    def copy(self) -> "QParams":
        return QParams(*(a.copy() for a in self.arrays()))

    def view(self, index) -> "QParams":
        """Basic-slice view into a stacked parameter set (shares memory)."""
        return QParams(*(a[index] for a in self.arrays()))

    def take(self, indices: np.ndarray) -> "QParams":
        """Reindex the agent axis (copies), e.g. after policy adoption."""
        return QParams(*(a[indices] for a in self.arrays()))

    def assign(self, other: "QParams") -> None:
        """Copy another parameter set's values into this one's arrays."""
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine[...] = theirs


def sync_target(params: QParams) -> QParams:
    """Deep copy for use as a target network."""
    return params.copy()


def q_forward(params: QParams, obs: np.ndarray) -> np.ndarray:
    """Two rectified hidden layers, linear readout."""
    h1 = np.maximum(obs @ params.w1 + params.b1[..., None, :], 0.0)
    h2 = np.maximum(h1 @ params.w2 + params.b2[..., None, :], 0.0)
    return h2 @ params.w3 + params.b3[..., None, :]


def policy_from_q(qvals: np.ndarray, tau: float) -> np.ndarray:
    """softmax(q / tau) along the last axis, stable under large magnitudes."""
    if tau <= 0.0:
        raise ValueError(f"softmax temperature must be positive, got {tau}")
    z = (qvals - qvals.max(axis=-1, keepdims=True)) / tau
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def scaled_log_policy(qvals: np.ndarray, tau: float) -> np.ndarray:
    """tau * ln softmax(q / tau), via the logsumexp identity.

    Stays finite even when the policy is numerically deterministic, where a
    log of an underflowed softmax entry would give -inf before clipping.
    """
    top = qvals.max(axis=-1, keepdims=True)
    lse = top + tau * np.log(np.exp((qvals - top) / tau).sum(axis=-1, keepdims=True))
    return qvals - lse


def munchausen_targets(
    obs: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    target_params: QParams,
    tau: float,
    gamma: float,
    log_policy_floor: float,
    entropy: bool = True,
) -> np.ndarray:
    """Regression target per transition, all terms under the target network.

    target = reward
           + clip(tau * ln pi(a_t | o_t), floor, 0)
           + gamma * sum_a pi(a | o') * (Q(o', a) - tau * ln pi(a | o'))

    With ``entropy=False`` both log-policy terms are dropped, leaving the
    plain expected-SARSA target (used for cross-checks).
    """
    q_next = q_forward(target_params, next_obs)
    pi_next = policy_from_q(q_next, tau)
    if entropy:
        q_now = q_forward(target_params, obs)
        log_pi_now = scaled_log_policy(q_now, tau)
        taken = np.take_along_axis(log_pi_now, actions[..., None], axis=-1)[..., 0]
        bonus = np.clip(taken, log_policy_floor, 0.0)
        next_value = (pi_next * (q_next - scaled_log_policy(q_next, tau))).sum(axis=-1)
    else:
        bonus = 0.0
        next_value = (pi_next * q_next).sum(axis=-1)
    return rewards + bonus + gamma * next_value


def loss_and_grads(
    params: QParams,
    obs: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> tuple[np.ndarray, QParams]:
    """Mean squared error of Q(o, a) against fixed targets, with exact
    backpropagated gradients. Loss is per agent when params are stacked."""
    z1 = obs @ params.w1 + params.b1[..., None, :]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.w2 + params.b2[..., None, :]
    h2 = np.maximum(z2, 0.0)
    q = h2 @ params.w3 + params.b3[..., None, :]

    picked = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
    diff = picked - targets
    batch = obs.shape[-2]
    loss = (diff**2).mean(axis=-1)

    dq = np.zeros_like(q)
    np.put_along_axis(dq, actions[..., None], (2.0 / batch) * diff[..., None], axis=-1)

    dw3 = h2.swapaxes(-1, -2) @ dq
    db3 = dq.sum(axis=-2)
    dh2 = dq @ params.w3.swapaxes(-1, -2)
    dz2 = dh2 * (z2 > 0.0)
    dw2 = h1.swapaxes(-1, -2) @ dz2
    db2 = dz2.sum(axis=-2)
    dh1 = dz2 @ params.w2.swapaxes(-1, -2)
    dz1 = dh1 * (z1 > 0.0)
    dw1 = obs.swapaxes(-1, -2) @ dz1
    db1 = dz1.sum(axis=-2)
    return loss, QParams(dw1, db1, dw2, db2, dw3, db3)


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a parameter set."""

    m: QParams
    v: QParams
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: QParams, lr: float = 0.01) -> "AdamState":
        zeros = lambda: QParams(*(np.zeros_like(a) for a in params.arrays()))
        return cls(m=zeros(), v=zeros(), lr=lr)


def adam_step(params: QParams, grads: QParams, state: AdamState) -> None:
    """One Adam update, in place."""
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g**2
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def train_step(
    params: QParams,
    target_params: QParams,
    opt: AdamState,
    obs: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    tau: float,
    gamma: float,
    log_policy_floor: float,
) -> np.ndarray:
    """One optimisation step on a sampled batch; returns the pre-step loss.

    Targets are computed under the target network and treated as constants:
    no gradient flows through them.
    """
    targets = munchausen_targets(
        obs, actions, rewards, next_obs, target_params, tau, gamma, log_policy_floor
    )
    loss, grads = loss_and_grads(params, obs, actions, targets)
    adam_step(params, grads, opt)
    return loss


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward_est: float
    next_obs: np.ndarray


@dataclass
class ReplayBuffer:
    """Fixed-capacity transition store, emptied at each outer iteration."""

    capacity: int
    transitions: list[Transition] = field(default_factory=list)

    def add(self, transition: Transition) -> None:
        if len(self.transitions) >= self.capacity:
            raise ValueError(f"buffer already holds {self.capacity} transitions")
        self.transitions.append(transition)

    def clear(self) -> None:
        self.transitions.clear()

    def __len__(self) -> int:
        return len(self.transitions)

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        """Sample with replacement (the batch size may exceed the buffer)."""
        if not self.transitions:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self.transitions), size=batch_size)
        return [self.transitions[i] for i in idx]


def save_params_text(params: QParams, path) -> None:
    """Text checkpoint: a shape header per tensor, then one value per line
    at 17 significant digits (round-trips float64 exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        for name in _FIELDS:
            arr = getattr(params, name)
            fh.write(f"{name} {' '.join(str(d) for d in arr.shape)}\n")
            for value in arr.ravel():
                fh.write(format(value, ".17g") + "\n")


def load_params_text(path) -> QParams:
    arrays = {}
    with open(path, "r", encoding="utf-8") as fh:
        line = fh.readline()
        while line:
            head = line.split()
            name, shape = head[0], tuple(int(d) for d in head[1:])
            size = int(np.prod(shape)) if shape else 1
            values = [float(fh.readline()) for _ in range(size)]
            arrays[name] = np.array(values).reshape(shape)
            line = fh.readline()
    return QParams(*(arrays[name] for name in _FIELDS))
