"""A single agent's Q-network learning pipeline on a toy problem.

Builds an observation, runs the forward pass, forms regularised targets
under a frozen copy of the network, and takes a few optimiser steps,
showing the regression loss falling and the softmax policy sharpening.
"""

import numpy as np

from gridmfc.env import GridSpec
from gridmfc.learner import (
    AdamState,
    QParams,
    adam_step,
    encode_observation,
    loss_and_grads,
    munchausen_targets,
    policy_from_q,
    q_forward,
    sync_target,
)

rng = np.random.default_rng(0)
grid = GridSpec(4, 4)
in_dim = grid.height + grid.width + grid.num_states

params = QParams.init(rng, in_dim, hidden=32, n_actions=5)
target = sync_target(params)
opt = AdamState.for_params(params, lr=0.01)

# Eight fake transitions: stay (action 4) pays 1, anything else pays 0.
obs = np.stack([
    encode_observation((r, c), np.full(16, 1 / 16), grid)
    for r, c in zip(rng.integers(0, 4, 8), rng.integers(0, 4, 8))
])
actions = rng.integers(0, 5, size=8)
rewards = (actions == 4).astype(float)
next_obs = obs  # toy: the world does not move

print("initial policy at obs[0]:", np.round(policy_from_q(q_forward(params, obs[:1])[0], 0.03), 3))
for step in range(60):
    targets = munchausen_targets(obs, actions, rewards, next_obs, target, 0.03, 0.9, -1.0)
    loss, grads = loss_and_grads(params, obs, actions, targets)
    adam_step(params, grads, opt)
    if step % 19 == 0:
        target = sync_target(params)
    if step % 10 == 0:
        print(f"step {step:2d} loss {float(loss):8.5f}")

probs = policy_from_q(q_forward(params, obs[:1])[0], 0.03)
print("trained policy at obs[0]:", np.round(probs, 3), "(action 4 = stay)")
