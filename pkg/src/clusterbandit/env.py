"""Synthetic personalization environments.

A state ``s`` and an action vector ``a`` are mapped into a latent feature
space by two fixed random networks; the reward is the cosine similarity of
the two latent vectors::

    r(s, a) = <F_S(s), F_A(a)> / (|F_S(s)| |F_A(a)|)

Both extractors use Gaussian activations ``exp(-z^2)`` on hidden layers, a
linear last layer (``gaussian_output=True`` puts the Gaussian there too),
and ``tanh`` on the output.
"""
from dataclasses import dataclass, asdict, field
import json

import numpy as np

from .nn import Layer, Mlp, mlp_forward, mlp_init
from .rng import derive_stream

__all__ = [
    "EnvConfig", "Environment", "DegenerateFeatureError", "build_environment", "sample_state",
    "sample_states", "extract_state_features", "extract_action_features", "reward", "reward_vector",
    "cosine_similarity", "save_environment", "load_environment", "ENV_FORMAT", "NORM_FLOOR",
]

ENV_FORMAT = "clusterbandit-env/1"
NORM_FLOOR = 1e-12


class DegenerateFeatureError(ArithmeticError):
    """A latent feature vector is (numerically) zero, so cosine similarity is undefined."""


@dataclass
class EnvConfig:
    d_state: int
    d_action: int
    n_actions: int
    d_latent: int
    r_architecture: list = field(default_factory=lambda: [10, 10, 10])
    seed: int = 0
    gaussian_output: bool = False

    def __post_init__(self):
        self.r_architecture = [int(w) for w in self.r_architecture]
        for name in ("d_state", "d_action", "n_actions", "d_latent"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.r_architecture or any(w <= 0 for w in self.r_architecture):
            raise ValueError(f"r_architecture must be a non-empty list of positive widths, got {self.r_architecture}")
        if self.r_architecture[-1] != self.d_latent:
            raise ValueError(
                f"last r_architecture width {self.r_architecture[-1]} must equal d_latent {self.d_latent}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def extractor_activations(self):
        last = "gaussian" if self.gaussian_output else "linear"
        return ["gaussian"] * (len(self.r_architecture) - 1) + [last]


def _sq_norms(rows):
    # row-wise reduction; for a single row this is the same summation as a 1-D sum
    return (rows * rows).sum(axis=-1)


def cosine_similarity(u, V):
    """Cosine similarity of vector ``u`` with every row of ``V`` (or with vector ``V``).

    Written as ``<u, v> / sqrt(|u|^2 |v|^2)`` with identical reductions for the
    numerator and the norms, so identical vectors give exactly 1 and opposite
    vectors exactly -1.
    """
    u = np.asarray(u, dtype=float)
    V = np.asarray(V, dtype=float)
    uu = float(_sq_norms(u))
    vv = _sq_norms(V)
    if uu < NORM_FLOOR ** 2 or np.any(vv < NORM_FLOOR ** 2):
        raise DegenerateFeatureError("feature vector norm below 1e-12; cosine similarity undefined")
    num = (V * u).sum(axis=-1)
    return np.clip(num / np.sqrt(uu * vv), -1.0, 1.0)


class Environment:
    """Contextual bandit with a deterministic latent-feature reward.

    Immutable after construction; the action features are computed once here.
    """

    def __init__(self, config, actions, state_extractor, action_extractor):
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (config.n_actions, config.d_action):
            raise ValueError(f"action matrix shape {actions.shape} != ({config.n_actions}, {config.d_action})")
        if np.any(np.abs(actions) > 1.0):
            raise ValueError("action entries must lie in [-1, 1]")
        if state_extractor.input_dim != config.d_state or state_extractor.output_dim != config.d_latent:
            raise ValueError(f"state extractor {state_extractor.sizes} does not map d_state -> d_latent")
        if action_extractor.input_dim != config.d_action or action_extractor.output_dim != config.d_latent:
            raise ValueError(f"action extractor {action_extractor.sizes} does not map d_action -> d_latent")
        self.config = config
        self.actions = actions
        self.state_extractor = state_extractor
        self.action_extractor = action_extractor
        feats = np.stack([np.tanh(mlp_forward(action_extractor, a)[0]) for a in actions])
        self._action_features = feats
        self._action_sq_norms = _sq_norms(feats)
        if np.any(self._action_sq_norms < NORM_FLOOR ** 2):
            bad = int(np.argmin(self._action_sq_norms))
            raise DegenerateFeatureError(f"action {bad} has a zero latent feature vector")
        for arr in (self.actions, self._action_features, self._action_sq_norms):
            arr.setflags(write=False)

    @property
    def n_actions(self):
        return self.config.n_actions

    @property
    def d_state(self):
        return self.config.d_state

    @property
    def action_features(self):
        return self._action_features

    def state_features(self, s):
        return extract_state_features(self, s)

    def reward(self, s, j):
        return reward(self, s, j)

    def reward_vector(self, s):
        return reward_vector(self, s)

    def reward_matrix(self, states):
        """Reward vectors for several states, one row per state (row-by-row, bit-identical to reward_vector)."""
        return np.stack([reward_vector(self, s) for s in np.atleast_2d(states)])

    def observe(self, states):
        """Agent observation of raw states; the full environment observes them unchanged."""
        return np.asarray(states, dtype=float)

    @property
    def observation_dim(self):
        return self.config.d_state

    def __repr__(self):
        c = self.config
        return (f"Environment(d_state={c.d_state}, d_action={c.d_action}, n_actions={c.n_actions}, "
                f"d_latent={c.d_latent}, r_architecture={c.r_architecture}, seed={c.seed})")


def build_environment(cfg):
    """Sample the action set and both feature extractors from streams derived from ``cfg.seed``."""
    acts = cfg.extractor_activations()
    actions = derive_stream(cfg.seed, "actions").uniform(-1.0, 1.0, (cfg.n_actions, cfg.d_action))
    fs = mlp_init([cfg.d_state] + cfg.r_architecture, acts, "normal", derive_stream(cfg.seed, "fs"))
    fa = mlp_init([cfg.d_action] + cfg.r_architecture, acts, "normal", derive_stream(cfg.seed, "fa"))
    return Environment(cfg, actions, fs, fa)


def sample_state(env, rng):
    return rng.uniform(-1.0, 1.0, env.config.d_state)


def sample_states(env, rng, n):
    """``n`` states; the same draws as ``n`` consecutive :func:`sample_state` calls."""
    return rng.uniform(-1.0, 1.0, (n, env.config.d_state))


def _check_state(env, s):
    s = np.asarray(s, dtype=float)
    if s.shape != (env.config.d_state,):
        raise ValueError(f"state of shape {s.shape}, expected ({env.config.d_state},)")
    return s


def extract_state_features(env, s):
    s = _check_state(env, s)
    return np.tanh(mlp_forward(env.state_extractor, s)[0])


def extract_action_features(env, j):
    if not 0 <= j < env.config.n_actions:
        raise IndexError(f"action index {j} out of range [0, {env.config.n_actions})")
    return env.action_features[j]


def reward_vector(env, s):
    """Rewards of every action at state ``s``."""
    fs = extract_state_features(env, s)
    ss = float(_sq_norms(fs))
    if ss < NORM_FLOOR ** 2:
        raise DegenerateFeatureError("state latent feature vector has norm below 1e-12")
    num = (env.action_features * fs).sum(axis=1)
    return np.clip(num / np.sqrt(ss * env._action_sq_norms), -1.0, 1.0)


def reward(env, s, j):
    if not 0 <= j < env.config.n_actions:
        raise IndexError(f"action index {j} out of range [0, {env.config.n_actions})")
    return float(reward_vector(env, s)[j])


def _net_arrays(prefix, net):
    out = {}
    for i, layer in enumerate(net.layers):
        out[f"{prefix}/{i}/weight"] = layer.weight
        out[f"{prefix}/{i}/bias"] = layer.bias
    out[f"{prefix}/activations"] = np.array(net.activations)
    return out


def _net_from_arrays(prefix, data):
    acts = [str(a) for a in data[f"{prefix}/activations"]]
    return Mlp([Layer(np.array(data[f"{prefix}/{i}/weight"]), np.array(data[f"{prefix}/{i}/bias"]), a)
                for i, a in enumerate(acts)])


def save_environment(env, path, cluster_model=None):
    """Write the environment (and optionally a fitted cluster model) to an ``.npz`` archive.

    Arrays are stored as raw float64, so :func:`load_environment` restores them bit for bit.
    """
    arrays = {"format": np.array(ENV_FORMAT), "config": np.array(json.dumps(asdict(env.config), sort_keys=True)),
              "actions": env.actions}
    arrays.update(_net_arrays("fs", env.state_extractor))
    arrays.update(_net_arrays("fa", env.action_extractor))
    if cluster_model is not None:
        arrays.update(cluster_model.to_arrays("cluster"))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_environment(path):
    """Inverse of :func:`save_environment`; returns ``(env, cluster_model_or_None)``."""
    from .clustering import ClusterModel

    with np.load(path, allow_pickle=False) as data:
        fmt = str(data["format"]) if "format" in data else None
        if fmt != ENV_FORMAT:
            raise ValueError(f"{path}: unsupported environment format {fmt!r} (expected {ENV_FORMAT})")
        cfg = EnvConfig(**json.loads(str(data["config"])))
        env = Environment(cfg, np.array(data["actions"]), _net_from_arrays("fs", data), _net_from_arrays("fa", data))
        model = ClusterModel.from_arrays("cluster", data) if "cluster/centroids" in data else None
    return env, model
