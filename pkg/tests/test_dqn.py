import numpy as np
import pytest

from agentscale.dqn import DqnAgent, DqnConfig, ReplayBuffer, Transition
from agentscale.nn import soft_update

OBS_DIM = 7


def tiny_config(**overrides):
    defaults = dict(
        obs_dim=OBS_DIM,
        hidden_dims=(8, 8),
        buffer_capacity=64,
        batch_size=8,
        learning_rate=1e-3,
    )
    defaults.update(overrides)
    return DqnConfig(**defaults)


def make_agent(seed=0, **overrides):
    return DqnAgent(tiny_config(**overrides), np.random.default_rng(seed))


def random_transition(rng, action=None, reward=None):
    return Transition(
        state=rng.normal(size=OBS_DIM),
        action=int(rng.integers(3)) if action is None else action,
        reward=float(rng.normal()) if reward is None else reward,
        next_state=rng.normal(size=OBS_DIM),
    )


class TestReplayBuffer:
    def test_fifo_eviction_at_capacity(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=5)
        items = [random_transition(rng, reward=float(i)) for i in range(8)]
        for item in items:
            buf.append(item)
        assert len(buf) == 5
        kept = {t.reward for t in buf.sample(np.random.default_rng(1), 5)}
        assert kept == {3.0, 4.0, 5.0, 6.0, 7.0}

    def test_sample_without_replacement(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=10)
        for i in range(10):
            buf.append(random_transition(rng, reward=float(i)))
        batch = buf.sample(np.random.default_rng(2), 10)
        assert sorted(t.reward for t in batch) == [float(i) for i in range(10)]

    def test_sampling_uniform_over_contents(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=8)
        for i in range(8):
            buf.append(random_transition(rng, reward=float(i)))
        counts = np.zeros(8)
        sample_rng = np.random.default_rng(3)
        draws = 4000
        for _ in range(draws):
            for t in buf.sample(sample_rng, 2):
                counts[int(t.reward)] += 1
        # each item expected draws * 2/8 times; 4 sigma binomial bound
        expected = draws * 2 / 8
        sigma = (draws * (2 / 8) * (1 - 2 / 8)) ** 0.5
        assert np.all(np.abs(counts - expected) < 4 * sigma)

    def test_underfull_sample_rejected(self):
        buf = ReplayBuffer(capacity=4)
        with pytest.raises(ValueError):
            buf.sample(np.random.default_rng(0), 1)


class TestActionSelection:
    def test_full_exploration_uniform(self):
        agent = make_agent(seed=5)
        agent.epsilon = 1.0
        obs = np.zeros(OBS_DIM)
        counts = np.zeros(3)
        draws = 10_000
        for _ in range(draws):
            counts[agent.select_action(obs, explore=True)] += 1
        p = 1 / 3
        sigma = (draws * p * (1 - p)) ** 0.5
        assert np.all(np.abs(counts - draws * p) < 3 * sigma)

    def test_greedy_argmax(self):
        agent = make_agent()
        agent.epsilon = 0.0
        agent.q_net.forward = lambda obs: np.array([0.1, 0.9, 0.3])
        assert agent.select_action(np.zeros(OBS_DIM)) == 1

    def test_tie_breaks_to_lowest_index(self):
        agent = make_agent()
        agent.epsilon = 0.0
        agent.q_net.forward = lambda obs: np.array([0.5, 0.5, 0.1])
        assert agent.select_action(np.zeros(OBS_DIM)) == 0

    def test_explore_false_forces_greedy(self):
        agent = make_agent()
        agent.epsilon = 1.0
        agent.q_net.forward = lambda obs: np.array([0.0, 0.0, 2.0])
        assert all(agent.select_action(np.zeros(OBS_DIM), explore=False) == 2 for _ in range(20))

    def test_action_delta_mapping(self):
        agent = make_agent(step_mc=25)
        assert agent.action_to_delta(0) == -25
        assert agent.action_to_delta(1) == 0
        assert agent.action_to_delta(2) == 25


class TestLearn:
    def test_underfull_buffer_is_noop(self):
        agent = make_agent()
        rng = np.random.default_rng(1)
        for _ in range(agent.config.batch_size - 1):
            agent.store(random_transition(rng))
        assert agent.learn() is None

    def test_gamma_zero_loss_is_mse_to_reward(self):
        # zero-weight network predicts 0 everywhere; targets equal rewards
        agent = make_agent(gamma=0.0)
        for w in agent.q_net.weights:
            w[...] = 0.0
        for b in agent.q_net.biases:
            b[...] = 0.0
        rng = np.random.default_rng(2)
        for _ in range(agent.config.batch_size):
            agent.store(random_transition(rng, reward=1.0))
        assert agent.learn() == pytest.approx(1.0)

    def test_gamma_zero_targets_equal_rewards_exactly(self):
        agent = make_agent(gamma=0.0)
        rng = np.random.default_rng(3)
        rewards = [float(rng.normal()) for _ in range(agent.config.batch_size)]
        for r in rewards:
            agent.store(random_transition(rng, reward=r))
        batch = agent.buffer.sample(np.random.default_rng(0), agent.config.batch_size)
        next_states = np.stack([t.next_state for t in batch])
        targets = np.array([t.reward for t in batch]) + 0.0 * agent.target_net.forward(
            next_states
        ).max(axis=1)
        np.testing.assert_array_equal(targets, [t.reward for t in batch])

    def test_loss_decreases_on_fixed_batch(self):
        agent = make_agent(seed=7, learning_rate=5e-3, tau=0.0)  # frozen target
        rng = np.random.default_rng(4)
        for _ in range(agent.config.batch_size):
            agent.store(random_transition(rng))
        losses = [agent.learn() for _ in range(300)]
        first = np.mean(losses[:20])
        last = np.mean(losses[-20:])
        assert last < first

    def test_learn_soft_updates_target(self):
        agent = make_agent(tau=0.5)
        rng = np.random.default_rng(5)
        for _ in range(agent.config.batch_size):
            agent.store(random_transition(rng))
        q_before = [p.copy() for p in agent.q_net.parameters()]
        t_before = [p.copy() for p in agent.target_net.parameters()]
        agent.learn()
        for t_new, q_new, t_old in zip(
            agent.target_net.parameters(), agent.q_net.parameters(), t_before
        ):
            np.testing.assert_array_equal(t_new, 0.5 * q_new + 0.5 * t_old)
        assert any(
            not np.array_equal(a, b) for a, b in zip(agent.q_net.parameters(), q_before)
        )


class TestSoftUpdateIdentity:
    @pytest.mark.parametrize("tau", [0.0, 0.005, 1.0])
    def test_exact_identity(self, tau):
        agent = make_agent(seed=11)
        online = agent.q_net
        target = agent.target_net
        # desynchronize first
        for p in target.parameters():
            p += 0.25
        expected = [
            tau * o + (1.0 - tau) * t for o, t in zip(online.parameters(), target.parameters())
        ]
        soft_update(target, online, tau)
        for got, want in zip(target.parameters(), expected):
            np.testing.assert_array_equal(got, want)
        if tau == 1.0:
            for got, o in zip(target.parameters(), online.parameters()):
                np.testing.assert_array_equal(got, o)


class TestEpsilonSchedule:
    def test_episode_zero_is_start(self):
        agent = make_agent()
        assert agent.decay_epsilon(0) == 1.0

    def test_hand_value_at_episode_ten(self):
        agent = make_agent()
        assert agent.decay_epsilon(10) == pytest.approx(0.95**10)
        assert round(agent.epsilon, 4) == 0.5987

    def test_floor(self):
        agent = make_agent()
        assert agent.decay_epsilon(10_000) == 0.05

    def test_monotone_non_increasing(self):
        agent = make_agent()
        values = [agent.decay_epsilon(e) for e in range(100)]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_checkpoint_round_trip(tmp_path):
    agent = make_agent(seed=13)
    rng = np.random.default_rng(6)
    for _ in range(agent.config.batch_size):
        agent.store(random_transition(rng))
    agent.learn()
    agent.epsilon = 0.42
    doc = agent.to_dict()

    clone = make_agent(seed=99)
    clone.load_dict(doc)
    assert clone.epsilon == 0.42
    obs = rng.normal(size=OBS_DIM)
    np.testing.assert_array_equal(agent.q_net.forward(obs), clone.q_net.forward(obs))
    np.testing.assert_array_equal(agent.target_net.forward(obs), clone.target_net.forward(obs))
    assert clone.optimizer.step_count == agent.optimizer.step_count
