"""Bandit versions of DQN, A2C and PPO, plus a uniform-random baseline.

Every interaction is a single-step episode, so the discount is zero
throughout: the DQN regression target is the observed reward, and the
actor-critic advantage is ``r - V(s)``.

All agents share one loop contract::

    a = agent.act(obs, rng, explore=True)
    agent.observe(Transition(obs, a, r))
    if agent.ready():
        agent.update(rng)
"""
from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np

from .nn import AdamState, Layer, Mlp, NonFiniteError, adam_step, clip_grad_norm, mlp_backward, \
    mlp_forward, mlp_init
from .rng import derive_stream

__all__ = [
    "ALGORITHMS", "DEFAULT_HYPERPARAMS", "AgentConfig", "Transition", "TrainStats", "Agent", "DQNAgent",
    "A2CAgent", "PPOAgent", "UniformAgent", "make_agent", "softmax", "log_softmax", "sample_categorical",
    "ppo_clip_objective", "save_agent", "load_agent", "AGENT_FORMAT",
]

ALGORITHMS = ("dqn", "a2c", "ppo", "uniform")
AGENT_FORMAT = "clusterbandit-agent/1"

DEFAULT_HYPERPARAMS = {
    "dqn": {
        "learning_rate": 1e-4,
        "buffer_size": 50_000,
        "batch_size": 32,
        "learning_starts": 1_000,
        "train_freq": 4,
        "exploration_fraction": 0.1,
        "exploration_initial_eps": 1.0,
        "exploration_final_eps": 0.05,
        "max_grad_norm": 10.0,
    },
    "a2c": {
        "learning_rate": 7e-4,
        "n_steps": 5,
        "vf_coef": 0.5,
        "ent_coef": 0.0,
        "max_grad_norm": 0.5,
    },
    "ppo": {
        "learning_rate": 3e-4,
        "n_steps": 256,
        "batch_size": 64,
        "n_epochs": 10,
        "clip_range": 0.2,
        "vf_coef": 0.5,
        "ent_coef": 0.0,
        "max_grad_norm": 0.5,
        "normalize_advantage": True,
    },
    "uniform": {},
}


@dataclass
class AgentConfig:
    algorithm: str
    obs_dim: int
    n_actions: int
    pi_architecture: list = field(default_factory=lambda: [64, 64, 64])
    seed: int = 0
    total_timesteps: int = 100_000
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.obs_dim <= 0 or self.n_actions <= 0:
            raise ValueError("obs_dim and n_actions must be positive")
        self.pi_architecture = [int(w) for w in self.pi_architecture]
        if any(w <= 0 for w in self.pi_architecture):
            raise ValueError(f"pi_architecture widths must be positive, got {self.pi_architecture}")
        if self.total_timesteps <= 0:
            raise ValueError("total_timesteps must be positive")
        unknown = set(self.hyperparams) - set(DEFAULT_HYPERPARAMS[self.algorithm])
        if unknown:
            raise ValueError(f"unknown {self.algorithm} hyperparameters: {sorted(unknown)}")

    @property
    def hp(self):
        merged = dict(DEFAULT_HYPERPARAMS[self.algorithm])
        merged.update(self.hyperparams)
        return merged


@dataclass
class Transition:
    observation: np.ndarray
    action: int
    reward: float


@dataclass
class TrainStats:
    status: str = "ok"
    loss: float = float("nan")
    policy_loss: float = float("nan")
    value_loss: float = float("nan")
    entropy: float = float("nan")
    grad_norm: float = float("nan")
    extra: dict = field(default_factory=dict)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sample_categorical(probs, rng):
    """Inverse-CDF draw from one probability vector using a single uniform."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, probs.size - 1)


def ppo_clip_objective(ratio, advantage, clip_range):
    """Per-sample clipped surrogate ``min(rho*A, clip(rho, 1-eps, 1+eps)*A)`` and its derivative in rho.

    Where the clipped branch is the minimum and rho lies outside the clip
    interval, the sample contributes no gradient.
    """
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    unclipped_obj = ratio * advantage
    clipped_obj = clipped * advantage
    objective = np.minimum(unclipped_obj, clipped_obj)
    inside = (ratio >= 1.0 - clip_range) & (ratio <= 1.0 + clip_range)
    use_unclipped = (unclipped_obj <= clipped_obj) | inside
    d_ratio = np.where(use_unclipped, advantage, 0.0)
    return objective, d_ratio


def _argmax(values):
    # np.argmax returns the lowest index among ties
    return int(np.argmax(values))


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite {what}")
    return arr


class Agent:
    """Interface shared by all agents."""

    algorithm = None
    stochastic_greedy = False

    def __init__(self, cfg):
        self.config = cfg
        self.hp = cfg.hp
        self.num_timesteps = 0
        self.n_updates = 0

    def networks(self):
        return {}

    def optimizers(self):
        return {}

    def _check_obs(self, obs):
        obs = np.asarray(obs, dtype=float)
        if obs.shape[-1] != self.config.obs_dim:
            raise ValueError(f"observation width {obs.shape[-1]} != {self.config.obs_dim}")
        return obs

    def _check_transition(self, t):
        if not 0 <= t.action < self.config.n_actions:
            raise ValueError(f"action {t.action} out of range")
        if not -1.0 <= t.reward <= 1.0:
            raise ValueError(f"reward {t.reward} outside [-1, 1]")
        self._check_obs(t.observation)

    def act(self, obs, rng, explore=True):
        raise NotImplementedError

    def greedy(self, obs_batch, rng=None):
        """Non-exploratory actions for a batch of observations."""
        raise NotImplementedError

    def observe(self, t):
        self._check_transition(t)
        self.num_timesteps += 1

    def ready(self):
        return False

    def update(self, rng):
        return TrainStats(status="skipped")


class UniformAgent(Agent):
    algorithm = "uniform"
    stochastic_greedy = True

    def act(self, obs, rng, explore=True):
        return int(rng.integers(self.config.n_actions))

    def greedy(self, obs_batch, rng=None):
        n = np.atleast_2d(obs_batch).shape[0]
        return rng.integers(self.config.n_actions, size=n)


class DQNAgent(Agent):
    """Q-regression onto observed rewards with an epsilon-greedy behaviour policy.

    No target network: with zero discount the target ``r`` has no parameters.
    """

    algorithm = "dqn"

    def __init__(self, cfg, q_net=None):
        super().__init__(cfg)
        hp = self.hp
        if q_net is None:
            sizes = [cfg.obs_dim] + cfg.pi_architecture + [cfg.n_actions]
            acts = ["relu"] * len(cfg.pi_architecture) + ["linear"]
            q_net = mlp_init(sizes, acts, "uniform_fan_in", derive_stream(cfg.seed, "init/q"))
        self.q_net = q_net
        self.optimizer = AdamState.for_net(q_net, lr=hp["learning_rate"])
        cap = int(hp["buffer_size"])
        self.buffer_obs = np.zeros((cap, cfg.obs_dim))
        self.buffer_act = np.zeros(cap, dtype=np.int64)
        self.buffer_rew = np.zeros(cap)
        self.buffer_pos = 0
        self.buffer_size = 0

    def networks(self):
        return {"q": self.q_net}

    def optimizers(self):
        return {"q": self.optimizer}

    @property
    def epsilon(self):
        hp = self.hp
        span = hp["exploration_fraction"] * self.config.total_timesteps
        frac = 1.0 if span <= 0 else min(1.0, self.num_timesteps / span)
        return hp["exploration_initial_eps"] + frac * (hp["exploration_final_eps"] - hp["exploration_initial_eps"])

    def q_values(self, obs):
        return _check_finite(self.q_net(self._check_obs(obs)), "Q-values")

    def act(self, obs, rng, explore=True):
        if explore and rng.random() < self.epsilon:
            return int(rng.integers(self.config.n_actions))
        return _argmax(self.q_values(obs))

    def greedy(self, obs_batch, rng=None):
        return np.argmax(self.q_values(np.atleast_2d(obs_batch)), axis=1)

    def observe(self, t):
        super().observe(t)
        cap = self.buffer_obs.shape[0]
        self.buffer_obs[self.buffer_pos] = t.observation
        self.buffer_act[self.buffer_pos] = t.action
        self.buffer_rew[self.buffer_pos] = t.reward
        self.buffer_pos = (self.buffer_pos + 1) % cap
        self.buffer_size = min(self.buffer_size + 1, cap)

    def buffer_contents(self):
        """Stored transitions, oldest first."""
        cap = self.buffer_obs.shape[0]
        start = (self.buffer_pos - self.buffer_size) % cap
        idx = (start + np.arange(self.buffer_size)) % cap
        return self.buffer_obs[idx], self.buffer_act[idx], self.buffer_rew[idx]

    def ready(self):
        hp = self.hp
        return (self.num_timesteps >= hp["learning_starts"] and self.num_timesteps % hp["train_freq"] == 0
                and self.buffer_size >= hp["batch_size"])

    def update(self, rng):
        hp = self.hp
        batch = int(hp["batch_size"])
        if self.buffer_size < batch:
            return TrainStats(status="skipped")
        idx = rng.integers(self.buffer_size, size=batch)
        obs, act, targets = self.buffer_obs[idx], self.buffer_act[idx], self.buffer_rew[idx]
        q, cache = mlp_forward(self.q_net, obs)
        rows = np.arange(batch)
        err = q[rows, act] - targets
        loss = float(np.mean(err * err))
        if not math.isfinite(loss):
            raise NonFiniteError(f"DQN loss is {loss} at update {self.n_updates}")
        dq = np.zeros_like(q)
        dq[rows, act] = 2.0 * err / batch
        grads, _ = mlp_backward(self.q_net, cache, dq)
        norm = clip_grad_norm([grads], hp["max_grad_norm"])
        adam_step(self.q_net, grads, self.optimizer)
        self.n_updates += 1
        return TrainStats(loss=loss, value_loss=loss, grad_norm=norm, extra={"targets": targets.copy(), "actions": act})


class _ActorCritic(Agent):
    """Separate actor (action logits) and critic (scalar value) with identical hidden stacks."""

    def __init__(self, cfg, actor=None, critic=None):
        super().__init__(cfg)
        hidden = cfg.pi_architecture
        acts = ["tanh"] * len(hidden)
        gains = [math.sqrt(2.0)] * len(hidden)
        if actor is None:
            actor = mlp_init([cfg.obs_dim] + hidden + [cfg.n_actions], acts + ["linear"], "orthogonal",
                             derive_stream(cfg.seed, "init/actor"), gains=gains + [0.01])
        if critic is None:
            critic = mlp_init([cfg.obs_dim] + hidden + [1], acts + ["linear"], "orthogonal",
                              derive_stream(cfg.seed, "init/critic"), gains=gains + [1.0])
        self.actor = actor
        self.critic = critic
        lr = self.hp["learning_rate"]
        self.actor_opt = AdamState.for_net(actor, lr=lr)
        self.critic_opt = AdamState.for_net(critic, lr=lr)
        self.rollout = []

    def networks(self):
        return {"actor": self.actor, "critic": self.critic}

    def optimizers(self):
        return {"actor": self.actor_opt, "critic": self.critic_opt}

    def action_probs(self, obs):
        return softmax(_check_finite(self.actor(self._check_obs(obs)), "actor logits"))

    def value(self, obs):
        return _check_finite(self.critic(self._check_obs(obs)), "critic output")[..., 0]

    def act(self, obs, rng, explore=True):
        logits = _check_finite(self.actor(self._check_obs(obs)), "actor logits")
        if explore:
            return sample_categorical(softmax(logits), rng)
        return _argmax(logits)

    def greedy(self, obs_batch, rng=None):
        logits = _check_finite(self.actor(self._check_obs(np.atleast_2d(obs_batch))), "actor logits")
        return np.argmax(logits, axis=1)

    def observe(self, t):
        super().observe(t)
        self.rollout.append(t)

    def ready(self):
        return len(self.rollout) >= self.hp["n_steps"]

    def _rollout_arrays(self):
        obs = np.stack([t.observation for t in self.rollout]).astype(float)
        act = np.array([t.action for t in self.rollout], dtype=np.int64)
        rew = np.array([t.reward for t in self.rollout], dtype=float)
        return obs, act, rew

    def _step(self, obs, act, returns, logit_grad_fn, vf_coef, ent_coef):
        """Shared loss assembly: ``policy + vf_coef * value - ent_coef * entropy`` and one Adam step.

        ``logit_grad_fn(logp, probs)`` returns ``(policy_loss, d policy_loss / d logits)``.
        """
        m = obs.shape[0]
        logits, a_cache = mlp_forward(self.actor, obs)
        values, c_cache = mlp_forward(self.critic, obs)
        values = values[:, 0]
        logp_all = log_softmax(logits)
        probs = np.exp(logp_all)
        policy_loss, d_logits = logit_grad_fn(logp_all, probs)
        ent_rows = -(probs * logp_all).sum(axis=1)
        entropy = float(ent_rows.mean())
        if ent_coef:
            d_logits = d_logits + ent_coef / m * probs * (logp_all + ent_rows[:, None])
        err = values - returns
        value_loss = float(np.mean(err * err))
        loss = policy_loss + vf_coef * value_loss - ent_coef * entropy
        if not math.isfinite(loss):
            raise NonFiniteError(f"{self.algorithm} loss is {loss} at update {self.n_updates}")
        d_values = (vf_coef * 2.0 / m * err)[:, None]
        g_actor, _ = mlp_backward(self.actor, a_cache, d_logits)
        g_critic, _ = mlp_backward(self.critic, c_cache, d_values)
        norm = clip_grad_norm([g_actor, g_critic], self.hp["max_grad_norm"])
        adam_step(self.actor, g_actor, self.actor_opt)
        adam_step(self.critic, g_critic, self.critic_opt)
        return TrainStats(loss=loss, policy_loss=policy_loss, value_loss=value_loss, entropy=entropy,
                          grad_norm=norm)


def _pg_logit_grad(logp_all, probs, act, weights):
    """Loss ``-mean(w * log pi(a|s))`` and its gradient in the logits (``w`` held fixed)."""
    m = act.size
    rows = np.arange(m)
    loss = float(-np.mean(weights * logp_all[rows, act]))
    onehot = np.zeros_like(probs)
    onehot[rows, act] = 1.0
    return loss, -(weights / m)[:, None] * (onehot - probs)


class A2CAgent(_ActorCritic):
    algorithm = "a2c"

    def update(self, rng=None):
        if not self.ready():
            return TrainStats(status="skipped")
        hp = self.hp
        obs, act, rew = self._rollout_arrays()
        adv = rew - self.value(obs)
        stats = self._step(obs, act, rew, lambda lp, p: _pg_logit_grad(lp, p, act, adv), hp["vf_coef"],
                           hp["ent_coef"])
        stats.extra["advantages"] = adv
        self.rollout.clear()
        self.n_updates += 1
        return stats


class PPOAgent(_ActorCritic):
    algorithm = "ppo"

    def update(self, rng):
        if not self.ready():
            return TrainStats(status="skipped")
        hp = self.hp
        obs, act, rew = self._rollout_arrays()
        n = obs.shape[0]
        rows = np.arange(n)
        old_logp = log_softmax(self.actor(obs))[rows, act]
        adv_all = rew - self.value(obs)
        clip = hp["clip_range"]
        mb = int(hp["batch_size"])
        record = {"first_ratios": None, "clip_fraction": []}
        stats = None
        for epoch in range(int(hp["n_epochs"])):
            perm = rng.permutation(n)
            for lo in range(0, n, mb):
                idx = perm[lo:lo + mb]
                adv = adv_all[idx]
                if hp["normalize_advantage"] and idx.size > 1:
                    adv = (adv - adv.mean()) / (adv.std(ddof=1) + 1e-8)
                a_mb, old_mb = act[idx], old_logp[idx]

                def logit_grad(logp_all, probs, a_mb=a_mb, old_mb=old_mb, adv=adv):
                    r = np.arange(a_mb.size)
                    ratio = np.exp(logp_all[r, a_mb] - old_mb)
                    objective, d_ratio = ppo_clip_objective(ratio, adv, clip)
                    if record["first_ratios"] is None:
                        record["first_ratios"] = ratio.copy()
                    record["clip_fraction"].append(float(np.mean(np.abs(ratio - 1.0) > clip)))
                    # d(-mean objective)/d logp = -d_ratio * ratio / m; chained through log-softmax
                    weights = d_ratio * ratio
                    _, d_logits = _pg_logit_grad(logp_all, probs, a_mb, weights)
                    return float(-np.mean(objective)), d_logits

                stats = self._step(obs[idx], a_mb, rew[idx], logit_grad, hp["vf_coef"], hp["ent_coef"])
        stats.extra.update(first_ratios=record["first_ratios"], clip_fraction=float(np.mean(record["clip_fraction"])),
                           advantages=adv_all)
        self.rollout.clear()
        self.n_updates += 1
        return stats


_CLASSES = {"dqn": DQNAgent, "a2c": A2CAgent, "ppo": PPOAgent, "uniform": UniformAgent}


def make_agent(cfg):
    return _CLASSES[cfg.algorithm](cfg)


def save_agent(agent, path):
    """Checkpoint config, network parameters and optimizer state to ``.npz`` (replay/rollout buffers excluded)."""
    arrays = {"format": np.array(AGENT_FORMAT), "config": np.array(json.dumps(asdict(agent.config), sort_keys=True)),
              "counters": np.array([agent.num_timesteps, agent.n_updates], dtype=np.int64)}
    for name, net in agent.networks().items():
        for i, layer in enumerate(net.layers):
            arrays[f"net/{name}/{i}/weight"] = layer.weight
            arrays[f"net/{name}/{i}/bias"] = layer.bias
        arrays[f"net/{name}/activations"] = np.array(net.activations)
    for name, opt in agent.optimizers().items():
        arrays[f"opt/{name}/hyper"] = np.array([opt.lr, opt.beta1, opt.beta2, opt.eps])
        arrays[f"opt/{name}/step"] = np.array(opt.step, dtype=np.int64)
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"opt/{name}/m/{i}"] = m
            arrays[f"opt/{name}/v/{i}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_agent(path):
    with np.load(path, allow_pickle=False) as data:
        fmt = str(data["format"]) if "format" in data else None
        if fmt != AGENT_FORMAT:
            raise ValueError(f"{path}: unsupported agent format {fmt!r} (expected {AGENT_FORMAT})")
        cfg = AgentConfig(**json.loads(str(data["config"])))
        agent = make_agent(cfg)
        for name, net in agent.networks().items():
            acts = [str(a) for a in data[f"net/{name}/activations"]]
            layers = [Layer(np.array(data[f"net/{name}/{i}/weight"]), np.array(data[f"net/{name}/{i}/bias"]), a)
                      for i, a in enumerate(acts)]
            for dst, src in zip(net.layers, layers):
                if dst.weight.shape != src.weight.shape:
                    raise ValueError(f"{path}: network {name!r} shape mismatch")
                dst.weight[...] = src.weight
                dst.bias[...] = src.bias
                dst.activation = src.activation
        for name, opt in agent.optimizers().items():
            opt.lr, opt.beta1, opt.beta2, opt.eps = (float(x) for x in data[f"opt/{name}/hyper"])
            opt.step = int(data[f"opt/{name}/step"])
            for i in range(len(opt.m)):
                opt.m[i][...] = data[f"opt/{name}/m/{i}"]
                opt.v[i][...] = data[f"opt/{name}/v/{i}"]
        agent.num_timesteps, agent.n_updates = (int(x) for x in data["counters"])
    return agent
