import math

import numpy as np
import pytest

from gridmfc.env import GridSpec
from gridmfc.learner import (
    AdamState,
    QParams,
    ReplayBuffer,
    Transition,
    adam_step,
    encode_observation,
    encode_observations,
    load_params_text,
    loss_and_grads,
    munchausen_targets,
    policy_from_q,
    q_forward,
    save_params_text,
    scaled_log_policy,
    sync_target,
    train_step,
)


def small_params(rng, in_dim=4, hidden=3, n_actions=5):
    return QParams.init(rng, in_dim, hidden, n_actions)


class TestEncoding:
    def test_2x2_uniform(self):
        grid = GridSpec(2, 2)
        obs = encode_observation((0, 0), np.full(4, 0.25), grid)
        assert list(obs) == [1, 0, 1, 0, 0.25, 0.25, 0.25, 0.25]

    def test_zeros_ablation_keeps_onehots(self):
        grid = GridSpec(2, 2)
        obs = encode_observation((1, 0), None, grid)
        assert list(obs) == [0, 1, 1, 0, 0, 0, 0, 0]

    def test_corner_with_point_mass(self):
        grid = GridSpec(2, 2)
        mf = np.zeros(4)
        mf[3] = 1.0
        obs = encode_observation((1, 1), mf, grid)
        assert list(obs) == [0, 1, 0, 1, 0, 0, 0, 1]

    def test_vectorised_matches_scalar(self):
        grid = GridSpec(3, 4)
        rng = np.random.default_rng(0)
        positions = np.stack([rng.integers(0, 3, 6), rng.integers(0, 4, 6)], axis=1)
        fields = rng.random((6, 12))
        stacked = encode_observations(positions, fields, grid)
        for i in range(6):
            assert np.array_equal(stacked[i], encode_observation(positions[i], fields[i], grid))


class TestForward:
    def test_zero_params_give_zero_output(self):
        zero = QParams(*(np.zeros(s) for s in [(4, 3), (3,), (3, 3), (3,), (3, 5), (5,)]))
        assert np.array_equal(q_forward(zero, np.ones((2, 4))), np.zeros((2, 5)))

    def test_single_path_hand_chain(self):
        # One input, one hidden unit per layer, one action: q = w3*relu(w2*relu(w1*x)).
        p = QParams(
            w1=np.array([[2.0]]), b1=np.array([0.5]),
            w2=np.array([[-3.0]]), b2=np.array([10.0]),
            w3=np.array([[0.25]]), b3=np.array([-1.0]),
        )
        x = np.array([[1.5]])
        h1 = max(2.0 * 1.5 + 0.5, 0.0)
        h2 = max(-3.0 * h1 + 10.0, 0.0)
        assert q_forward(p, x)[0, 0] == pytest.approx(0.25 * h2 - 1.0, abs=1e-15)

    def test_finite_output_for_finite_input(self):
        rng = np.random.default_rng(1)
        p = small_params(rng)
        out = q_forward(p, rng.standard_normal((8, 4)) * 100)
        assert np.all(np.isfinite(out))

    def test_stacked_matches_per_agent(self):
        rng = np.random.default_rng(2)
        singles = [small_params(rng) for _ in range(4)]
        stacked = QParams(*(np.stack([getattr(p, f) for p in singles])
                            for f in ("w1", "b1", "w2", "b2", "w3", "b3")))
        obs = rng.standard_normal((4, 6, 4))
        batched = q_forward(stacked, obs)
        for i, p in enumerate(singles):
            assert np.array_equal(batched[i], q_forward(p, obs[i]))


class TestPolicy:
    def test_equal_qvals_uniform(self):
        probs = policy_from_q(np.zeros(5), 0.03)
        assert np.allclose(probs, 0.2, atol=1e-15)

    def test_log_ratio_two_actions(self):
        tau = 0.7
        probs = policy_from_q(np.array([0.0, tau * math.log(2.0)]), tau)
        assert probs == pytest.approx([1 / 3, 2 / 3], abs=1e-12)

    def test_small_temperature_concentrates_on_argmax(self):
        probs = policy_from_q(np.array([0.1, 0.5, 0.2]), 1e-6)
        assert probs[1] == pytest.approx(1.0, abs=1e-12)

    def test_normalised_under_large_magnitudes(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = rng.uniform(-1e3, 1e3, size=5)
            probs = policy_from_q(q, 0.03)
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(probs >= 0.0)

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            policy_from_q(np.zeros(3), 0.0)

    def test_scaled_log_policy_matches_log_of_softmax(self):
        rng = np.random.default_rng(4)
        q = rng.uniform(-2, 2, size=5)
        tau = 0.3
        assert scaled_log_policy(q, tau) == pytest.approx(
            tau * np.log(policy_from_q(q, tau)), abs=1e-12
        )


def scalar_target_oracle(q_now, q_next, action, reward, tau, gamma, floor):
    """Independent scalar evaluation of the regularised target."""
    exp_now = [math.exp(v / tau) for v in q_now]
    pi_now = [e / sum(exp_now) for e in exp_now]
    bonus = min(max(tau * math.log(pi_now[action]), floor), 0.0)
    exp_next = [math.exp(v / tau) for v in q_next]
    pi_next = [e / sum(exp_next) for e in exp_next]
    soft_value = sum(
        p * (q - tau * math.log(p)) for p, q in zip(pi_next, q_next)
    )
    return reward + bonus + gamma * soft_value


class IdentityNet:
    """Params realising q(obs) ~= obs, so tests can choose q-values directly.

    A constant shift keeps the hidden activations positive (ReLU transparent)
    and is subtracted again at the output; the float error is a few ulp at
    the shift's scale, far below the tolerances used here.
    """

    @staticmethod
    def params(dim, shift=64.0):
        eye = np.eye(dim)
        return QParams(
            w1=eye.copy(), b1=np.full(dim, shift),
            w2=eye.copy(), b2=np.zeros(dim),
            w3=eye.copy(), b3=np.full(dim, -shift),
        )


class TestMunchausenTarget:
    def test_constant_q_hand_case(self):
        # Target net yields equal q-values c over five actions.
        c = 0.7
        params = IdentityNet.params(5)
        obs = np.full((1, 5), c)
        next_obs = np.full((1, 5), c)
        tau, gamma = 0.03, 0.9
        t = munchausen_targets(
            obs, np.array([2]), np.array([0.5]), next_obs, params, tau, gamma, -1.0
        )[0]
        penalty = tau * math.log(0.2)
        expected = 0.5 + penalty + gamma * (c - penalty)
        assert t == pytest.approx(expected, abs=1e-12)
        assert penalty == pytest.approx(-0.0482831, abs=1e-6)

    def test_penalty_clips_at_the_floor(self):
        # Near-deterministic target policy, wrong action: raw bonus way below -1.
        params = IdentityNet.params(3)
        obs = np.array([[50.0, 0.0, 0.0]])
        t_clipped = munchausen_targets(
            obs, np.array([1]), np.array([0.0]), obs * 0.0, params, 0.03, 0.0, -1.0
        )[0]
        assert t_clipped == pytest.approx(-1.0, abs=1e-12)

    def test_gamma_zero_leaves_reward_plus_penalty(self):
        rng = np.random.default_rng(5)
        params = IdentityNet.params(4)
        obs = rng.uniform(-1, 1, size=(1, 4))
        reward = 0.3
        t = munchausen_targets(
            obs, np.array([0]), np.array([reward]), obs, params, 0.5, 0.0, -1.0
        )[0]
        pi = policy_from_q(obs[0], 0.5)
        assert t == pytest.approx(reward + max(0.5 * math.log(pi[0]), -1.0), abs=1e-12)

    def test_matches_scalar_oracle_on_random_instances(self):
        rng = np.random.default_rng(6)
        params = IdentityNet.params(5)
        for _ in range(100):
            q_now = rng.uniform(-5, 5, size=5)
            q_next = rng.uniform(-5, 5, size=5)
            action = int(rng.integers(0, 5))
            reward = float(rng.random())
            # tau bounded away from 0 so the naive-exponential oracle cannot
            # underflow a probability to exactly zero.
            tau = float(rng.uniform(0.02, 1.0))
            gamma = float(rng.uniform(0.0, 0.99))
            floor = float(-rng.uniform(0.1, 2.0))
            got = munchausen_targets(
                q_now[None, :], np.array([action]), np.array([reward]),
                q_next[None, :], params, tau, gamma, floor,
            )[0]
            want = scalar_target_oracle(q_now, q_next, action, reward, tau, gamma, floor)
            assert got == pytest.approx(want, abs=1e-10)

    def test_entropy_disabled_reduces_to_expected_sarsa(self):
        rng = np.random.default_rng(7)
        params = IdentityNet.params(4)
        q_now = rng.uniform(-1, 1, size=4)
        q_next = rng.uniform(-1, 1, size=4)
        tau, gamma, reward = 0.2, 0.9, 0.4
        got = munchausen_targets(
            q_now[None, :], np.array([1]), np.array([reward]),
            q_next[None, :], params, tau, gamma, -1.0, entropy=False,
        )[0]
        pi = policy_from_q(q_next, tau)
        sarsa = reward + gamma * float((pi * q_next).sum())
        assert got == pytest.approx(sarsa, abs=1e-12)

    def test_penalty_contribution_always_within_floor_and_zero(self):
        rng = np.random.default_rng(8)
        params = IdentityNet.params(5)
        for _ in range(100):
            q = rng.uniform(-40, 40, size=5)
            action = int(rng.integers(0, 5))
            with_entropy = munchausen_targets(
                q[None, :], np.array([action]), np.array([0.0]),
                np.zeros((1, 5)), params, 0.03, 0.0, -1.0,
            )[0]
            assert -1.0 - 1e-12 <= with_entropy <= 1e-12


def numerical_gradients(params, obs, actions, targets, eps=1e-6):
    grads = []
    for arr in params.arrays():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + eps
            up, _ = loss_and_grads(params, obs, actions, targets)
            flat[j] = keep - eps
            down, _ = loss_and_grads(params, obs, actions, targets)
            flat[j] = keep
            gflat[j] = (np.sum(up) - np.sum(down)) / (2 * eps)
        grads.append(g)
    return QParams(*grads)


class TestGradients:
    def test_backprop_matches_central_differences(self):
        rng = np.random.default_rng(9)
        for trial in range(3):
            params = small_params(rng, in_dim=3, hidden=2, n_actions=3)
            obs = rng.uniform(-1, 1, size=(4, 3))
            actions = rng.integers(0, 3, size=4)
            targets = rng.uniform(-1, 1, size=4)
            _, analytic = loss_and_grads(params, obs, actions, targets)
            numeric = numerical_gradients(params, obs, actions, targets)
            for a, n in zip(analytic.arrays(), numeric.arrays()):
                scale = np.maximum(np.abs(n), 1e-6)
                assert np.max(np.abs(a - n) / scale) < 1e-4

    def test_single_transition_one_hidden_unit(self):
        rng = np.random.default_rng(10)
        params = small_params(rng, in_dim=2, hidden=1, n_actions=2)
        obs = np.array([[0.3, -0.7]])
        actions = np.array([1])
        targets = np.array([0.25])
        _, analytic = loss_and_grads(params, obs, actions, targets)
        numeric = numerical_gradients(params, obs, actions, targets)
        for a, n in zip(analytic.arrays(), numeric.arrays()):
            assert a == pytest.approx(n, rel=1e-4, abs=1e-8)

    def test_stacked_loss_and_grads_match_per_agent(self):
        rng = np.random.default_rng(11)
        singles = [small_params(rng) for _ in range(3)]
        stacked = QParams(*(np.stack([getattr(p, f) for p in singles])
                            for f in ("w1", "b1", "w2", "b2", "w3", "b3")))
        obs = rng.uniform(-1, 1, size=(3, 6, 4))
        actions = rng.integers(0, 5, size=(3, 6))
        targets = rng.uniform(-1, 1, size=(3, 6))
        loss_s, grads_s = loss_and_grads(stacked, obs, actions, targets)
        for i, p in enumerate(singles):
            loss_i, grads_i = loss_and_grads(p, obs[i], actions[i], targets[i])
            assert loss_s[i] == loss_i
            for gs, gi in zip(grads_s.arrays(), grads_i.arrays()):
                assert np.array_equal(gs[i], gi)


class TestTraining:
    def test_zero_loss_batch_leaves_params_untouched(self):
        rng = np.random.default_rng(12)
        params = small_params(rng)
        obs = rng.uniform(-1, 1, size=(4, 4))
        actions = rng.integers(0, 5, size=4)
        picked = np.take_along_axis(q_forward(params, obs), actions[:, None], axis=-1)[:, 0]
        opt = AdamState.for_params(params)
        before = params.copy()
        loss, grads = loss_and_grads(params, obs, actions, picked)
        adam_step(params, grads, opt)
        assert loss == 0.0
        for now, was in zip(params.arrays(), before.arrays()):
            assert np.array_equal(now, was)

    def test_repeated_steps_shrink_the_loss(self):
        rng = np.random.default_rng(13)
        params = small_params(rng, in_dim=3, hidden=8, n_actions=2)
        opt = AdamState.for_params(params, lr=0.01)
        obs = rng.uniform(-1, 1, size=(16, 3))
        actions = rng.integers(0, 2, size=16)
        targets = rng.uniform(0, 1, size=16)
        losses = []
        for _ in range(100):
            loss, grads = loss_and_grads(params, obs, actions, targets)
            adam_step(params, grads, opt)
            losses.append(float(loss))
        assert losses[-1] < losses[0]
        assert losses[-1] < 1e-2

    def test_train_step_runs_whole_pipeline(self):
        rng = np.random.default_rng(14)
        params = small_params(rng)
        target = sync_target(params)
        opt = AdamState.for_params(params)
        obs = rng.uniform(-1, 1, size=(8, 4))
        next_obs = rng.uniform(-1, 1, size=(8, 4))
        actions = rng.integers(0, 5, size=8)
        rewards = rng.random(8)
        loss = train_step(params, target, opt, obs, actions, rewards, next_obs, 0.03, 0.9, -1.0)
        assert np.isfinite(loss).all()
        # Target stays fixed while the online params moved.
        assert np.array_equal(target.w1, sync_target(target).w1)
        assert not np.array_equal(params.w1, target.w1)

    def test_sync_target_is_a_deep_copy(self):
        rng = np.random.default_rng(15)
        params = small_params(rng)
        target = sync_target(params)
        params.w1 += 1.0
        assert not np.array_equal(target.w1, params.w1)

    def test_sync_schedule_fires_at_zero_and_nu(self):
        fired = [l for l in range(20) if l % 19 == 0]
        assert fired == [0, 19]


class TestReplayBuffer:
    def test_capacity_enforced(self):
        buffer = ReplayBuffer(capacity=2)
        t = Transition(np.zeros(2), 0, 0.0, np.zeros(2))
        buffer.add(t)
        buffer.add(t)
        with pytest.raises(ValueError):
            buffer.add(t)

    def test_clear_empties(self):
        buffer = ReplayBuffer(capacity=3)
        buffer.add(Transition(np.zeros(2), 0, 0.0, np.zeros(2)))
        buffer.clear()
        assert len(buffer) == 0

    def test_sampling_with_replacement_exceeds_size(self):
        buffer = ReplayBuffer(capacity=2)
        buffer.add(Transition(np.zeros(1), 0, 0.1, np.zeros(1)))
        buffer.add(Transition(np.ones(1), 1, 0.9, np.ones(1)))
        batch = buffer.sample(np.random.default_rng(0), 32)
        assert len(batch) == 32
        assert {b.action for b in batch} <= {0, 1}

    def test_sampling_empty_raises(self):
        with pytest.raises(ValueError):
            ReplayBuffer(capacity=1).sample(np.random.default_rng(0), 4)


class TestCheckpoint:
    def test_text_roundtrip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(16)
        params = small_params(rng)
        path = tmp_path / "params.txt"
        save_params_text(params, path)
        loaded = load_params_text(path)
        for a, b in zip(params.arrays(), loaded.arrays()):
            assert np.array_equal(a, b)

    def test_stacked_roundtrip(self, tmp_path):
        rng = np.random.default_rng(17)
        stacked = QParams.init_stacked(
            [np.random.default_rng(s) for s in (1, 2)], 4, 3, 5
        )
        path = tmp_path / "stack.txt"
        save_params_text(stacked, path)
        loaded = load_params_text(path)
        for a, b in zip(stacked.arrays(), loaded.arrays()):
            assert np.array_equal(a, b)
