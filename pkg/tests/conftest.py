import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clusterbandit.env import EnvConfig, Environment, build_environment  # noqa: E402
from clusterbandit.nn import Layer, Mlp  # noqa: E402


@pytest.fixture
def small_env():
    return build_environment(EnvConfig(6, 4, 5, 3, [4, 3], seed=11))


@pytest.fixture
def low_dim_env():
    """The low-dimensional, simple-reward environment (100 states/actions dims, latent 10)."""
    return build_environment(EnvConfig(100, 100, 100, 10, [10, 10, 10], seed=42))


def identity_net(dim):
    return Mlp([Layer(np.eye(dim), np.zeros(dim), "linear")])


def identity_env(dim, n_actions, seed=0):
    """Both extractors are tanh of the raw vector, so rewards follow raw geometry."""
    actions = np.random.default_rng(seed).uniform(-1, 1, (n_actions, dim))
    cfg = EnvConfig(dim, dim, n_actions, dim, [dim], seed=seed)
    return Environment(cfg, actions, identity_net(dim), identity_net(dim))


class TableEnv:
    """Stand-in environment with an explicit reward table (one row per discrete state id)."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        self.n_actions = self.table.shape[1]
        self.d_state = 1
        self.observation_dim = 1

    def reward_vector(self, s):
        return self.table[int(np.asarray(s).ravel()[0])]

    def reward(self, s, j):
        return float(self.reward_vector(s)[j])

    def reward_matrix(self, states):
        return np.stack([self.reward_vector(s) for s in np.atleast_2d(states)])

    def observe(self, states):
        return np.asarray(states, dtype=float)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
