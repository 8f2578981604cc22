import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from clusterbandit.agents import (A2CAgent, AgentConfig, DQNAgent, PPOAgent, Transition, UniformAgent, load_agent,
                                  log_softmax, make_agent, ppo_clip_objective, sample_categorical, save_agent, softmax)
from clusterbandit.nn import Layer, Mlp
from clusterbandit.rng import derive_stream


def _sizes(net):
    return [net.layers[0].weight.shape[1]] + [l.weight.shape[0] for l in net.layers]


def test_network_shapes():
    dqn = make_agent(AgentConfig("dqn", 100, 100, [32, 32, 32]))
    assert _sizes(dqn.q_net) == [100, 32, 32, 32, 100]
    ppo = make_agent(AgentConfig("ppo", 1000, 1000, [128, 128, 128]))
    assert _sizes(ppo.actor) == [1000, 128, 128, 128, 1000]
    assert _sizes(ppo.critic) == [1000, 128, 128, 128, 1]
    assert ppo.actor.activations == ["tanh"] * 3 + ["linear"]
    assert dqn.q_net.activations == ["relu"] * 3 + ["linear"]


def test_config_rejects_bad_input():
    with pytest.raises(ValueError):
        AgentConfig("sarsa", 2, 2)
    with pytest.raises(ValueError):
        AgentConfig("dqn", 2, 2, [0])
    with pytest.raises(ValueError):
        AgentConfig("dqn", 2, 2, hyperparams={"clip_range": 0.1})


def _fixed_q(values):
    values = np.asarray(values, dtype=float)
    net = Mlp([Layer(np.zeros((values.size, 1)), values.copy(), "linear")])
    return DQNAgent(AgentConfig("dqn", 1, values.size, [4]), q_net=net)


def test_dqn_greedy_picks_largest_q():
    agent = _fixed_q([0.1, 0.9])
    rng = derive_stream(0, "a")
    assert agent.act(np.array([0.3]), rng, explore=False) == 1
    assert agent.greedy(np.zeros((3, 1))).tolist() == [1, 1, 1]
    assert _fixed_q([0.5, 0.5, 0.1]).greedy(np.zeros((1, 1)))[0] == 0


def test_dqn_full_exploration_is_uniform():
    agent = _fixed_q([0.0, 5.0, 0.0, 0.0])
    assert agent.epsilon == 1.0
    rng = derive_stream(1, "eps")
    counts = np.bincount([agent.act(np.zeros(1), rng) for _ in range(100_000)], minlength=4)
    assert chisquare(counts).pvalue > 1e-3


def test_epsilon_schedule():
    agent = make_agent(AgentConfig("dqn", 1, 2, [4], total_timesteps=1000))
    assert agent.epsilon == 1.0
    agent.num_timesteps = 50
    assert abs(agent.epsilon - 0.525) < 1e-12
    agent.num_timesteps = 100
    assert abs(agent.epsilon - 0.05) < 1e-12
    agent.num_timesteps = 900
    assert abs(agent.epsilon - 0.05) < 1e-12


def test_zero_logit_policy_is_uniform():
    agent = make_agent(AgentConfig("ppo", 2, 5, [8]))
    agent.actor.layers[-1].weight[...] = 0.0
    agent.actor.layers[-1].bias[...] = 0.0
    assert np.allclose(agent.action_probs(np.ones(2)), 0.2)
    rng = derive_stream(2, "pi")
    counts = np.bincount([agent.act(np.ones(2), rng) for _ in range(50_000)], minlength=5)
    assert chisquare(counts).pvalue > 1e-3


def test_replay_buffer_fifo_eviction():
    agent = make_agent(AgentConfig("dqn", 1, 3, [4], hyperparams={"buffer_size": 4}))
    for i in range(6):
        agent.observe(Transition(np.array([float(i)]), i % 3, i / 10))
    obs, act, rew = agent.buffer_contents()
    assert obs[:, 0].tolist() == [2.0, 3.0, 4.0, 5.0]
    assert act.tolist() == [2, 0, 1, 2]
    assert rew.tolist() == [0.2, 0.3, 0.4, 0.5]


def test_dqn_ready_schedule():
    agent = make_agent(AgentConfig("dqn", 1, 2, [4], hyperparams={"learning_starts": 8, "batch_size": 4,
                                                                   "train_freq": 4}))
    flags = []
    for i in range(16):
        agent.observe(Transition(np.zeros(1), 0, 0.0))
        flags.append(agent.ready())
    assert [i + 1 for i, f in enumerate(flags) if f] == [8, 12, 16]


@pytest.mark.parametrize("algo,n", [("a2c", 5), ("ppo", 256)])
def test_rollout_ready_after_n_steps(algo, n):
    agent = make_agent(AgentConfig(algo, 2, 3, [4]))
    for i in range(n - 1):
        agent.observe(Transition(np.zeros(2), 0, 0.0))
        assert not agent.ready()
    agent.observe(Transition(np.zeros(2), 0, 0.0))
    assert agent.ready()
    agent.update(derive_stream(0, "u"))
    assert agent.rollout == [] and agent.n_updates == 1


@pytest.mark.parametrize("algo", ["dqn", "a2c", "ppo", "uniform"])
def test_transition_validation(algo):
    agent = make_agent(AgentConfig(algo, 2, 3, [4]))
    with pytest.raises(ValueError):
        agent.observe(Transition(np.zeros(2), 0, 1.5))
    with pytest.raises(ValueError):
        agent.observe(Transition(np.zeros(2), 3, 0.0))
    with pytest.raises(ValueError):
        agent.observe(Transition(np.zeros(3), 0, 0.0))
    agent.observe(Transition(np.zeros(2), 2, -1.0))


def _run_bandit(agent, rewards, steps, rng):
    obs = np.array([1.0])
    for _ in range(steps):
        a = agent.act(obs, rng)
        agent.observe(Transition(obs, a, rewards[a]))
        if agent.ready():
            agent.update(rng)
    return agent


def test_dqn_learns_tabular_rewards():
    cfg = AgentConfig("dqn", 1, 2, [8], seed=0, total_timesteps=5000,
                      hyperparams={"learning_rate": 1e-3, "learning_starts": 100})
    agent = _run_bandit(make_agent(cfg), [0.2, 0.8], 5000, derive_stream(0, "tab"))
    assert np.max(np.abs(agent.q_values(np.array([1.0])) - [0.2, 0.8])) < 1e-2


def test_dqn_update_regresses_onto_rewards():
    agent = make_agent(AgentConfig("dqn", 1, 2, [4], hyperparams={"batch_size": 4, "learning_starts": 4}))
    for i in range(4):
        agent.observe(Transition(np.array([1.0]), i % 2, 0.25 * i))
    stats = agent.update(derive_stream(0, "u"))
    assert set(stats.extra["targets"]) <= {0.0, 0.25, 0.5, 0.75}
    assert np.isfinite(stats.loss)


@pytest.mark.parametrize("algo", ["a2c", "ppo"])
def test_actor_critic_prefers_better_action(algo):
    hp = {"learning_rate": 3e-3} if algo == "a2c" else {"n_steps": 64, "learning_rate": 3e-3}
    agent = make_agent(AgentConfig(algo, 1, 3, [16], seed=3, hyperparams=hp))
    _run_bandit(agent, [0.1, 0.9, -0.5], 4000, derive_stream(3, "ac"))
    probs = agent.action_probs(np.array([1.0]))
    assert probs[1] > 0.9
    assert abs(agent.value(np.array([1.0])) - 0.9) < 0.1


def test_ppo_first_ratios_are_one_and_clip_is_inactive():
    agent = make_agent(AgentConfig("ppo", 3, 4, [8], seed=1, hyperparams={"n_steps": 32, "batch_size": 32,
                                                                          "n_epochs": 1}))
    twin = make_agent(AgentConfig("ppo", 3, 4, [8], seed=1, hyperparams={"n_steps": 32, "batch_size": 32,
                                                                         "n_epochs": 1, "clip_range": 1e9}))
    rng = derive_stream(1, "obs")
    for _ in range(32):
        o = rng.normal(size=3)
        a = int(rng.integers(4))
        r = float(rng.uniform(-1, 1))
        agent.observe(Transition(o, a, r))
        twin.observe(Transition(o, a, r))
    stats = agent.update(derive_stream(1, "u"))
    twin.update(derive_stream(1, "u"))
    assert np.all(stats.extra["first_ratios"] == 1.0)
    for la, lb in zip(agent.actor.layers, twin.actor.layers):
        assert np.array_equal(la.weight, lb.weight)


def test_a2c_zero_advantage_leaves_actor_unchanged():
    agent = make_agent(AgentConfig("a2c", 2, 3, [4], seed=5))
    obs = np.array([0.3, -0.2])
    v = float(agent.value(obs))
    before = [l.weight.copy() for l in agent.actor.layers]
    for a in (0, 1, 2, 0, 1):
        agent.observe(Transition(obs, a, v))
    stats = agent.update()
    assert np.max(np.abs(stats.extra["advantages"])) == 0.0
    assert all(np.array_equal(b, l.weight) for b, l in zip(before, agent.actor.layers))


def test_ppo_clip_objective_branches():
    ratio = np.array([1.5, 1.5, 0.5, 0.5, 1.1, 0.9])
    adv = np.array([1.0, -1.0, 1.0, -1.0, 2.0, -2.0])
    obj, d = ppo_clip_objective(ratio, adv, 0.2)
    assert np.allclose(obj, [1.2, -1.5, 0.5, -0.8, 2.2, -1.8])
    assert d.tolist() == [0.0, -1.0, 1.0, 0.0, 2.0, -2.0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_softmax_properties(logits):
    z = np.array(logits)
    p = softmax(z)
    assert abs(p.sum() - 1.0) < 1e-12 and np.all(p >= 0)
    assert np.allclose(np.exp(log_softmax(z)), p)
    assert np.allclose(softmax(z + 7.0), p)


def test_sample_categorical_handles_point_mass():
    rng = derive_stream(0, "c")
    assert all(sample_categorical(np.array([0.0, 0.0, 1.0]), rng) == 2 for _ in range(100))


@pytest.mark.parametrize("algo", ["dqn", "a2c", "ppo", "uniform"])
def test_actions_are_valid_and_reproducible(algo):
    def trace():
        agent = make_agent(AgentConfig(algo, 3, 7, [8], seed=9, hyperparams={"learning_starts": 10}
                                       if algo == "dqn" else {}))
        rng = derive_stream(9, "run")
        out = []
        for _ in range(300):
            o = rng.normal(size=3)
            a = agent.act(o, rng)
            out.append(a)
            agent.observe(Transition(o, a, float(np.tanh(o[0]) * (a == 3))))
            if agent.ready():
                agent.update(rng)
        return out
    first = trace()
    assert all(0 <= a < 7 for a in first)
    assert first == trace()


def test_uniform_agent():
    agent = UniformAgent(AgentConfig("uniform", 2, 4))
    assert agent.stochastic_greedy
    g = agent.greedy(np.zeros((1000, 2)), derive_stream(0, "g"))
    assert set(g.tolist()) == {0, 1, 2, 3}


@pytest.mark.parametrize("cls,algo", [(DQNAgent, "dqn"), (A2CAgent, "a2c"), (PPOAgent, "ppo")])
def test_checkpoint_round_trip(tmp_path, cls, algo):
    agent = make_agent(AgentConfig(algo, 3, 4, [8], seed=2, hyperparams={"learning_starts": 8, "batch_size": 8}
                                   if algo == "dqn" else {"n_steps": 16} if algo == "ppo" else {}))
    rng = derive_stream(2, "o")
    for _ in range(64):
        o = rng.normal(size=3)
        a = agent.act(o, rng)
        agent.observe(Transition(o, a, 0.5 if a == 1 else -0.5))
        if agent.ready():
            agent.update(rng)
    path = tmp_path / f"{algo}.npz"
    save_agent(agent, path)
    loaded = load_agent(path)
    assert isinstance(loaded, cls)
    assert loaded.num_timesteps == agent.num_timesteps and loaded.n_updates == agent.n_updates
    obs = derive_stream(3, "x").normal(size=(20, 3))
    assert np.array_equal(loaded.greedy(obs), agent.greedy(obs))
    for name, opt in agent.optimizers().items():
        other = loaded.optimizers()[name]
        assert other.step == opt.step
        assert all(np.array_equal(a, b) for a, b in zip(opt.m, other.m))


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, format=np.array("something-else"))
    with pytest.raises(ValueError):
        load_agent(path)
