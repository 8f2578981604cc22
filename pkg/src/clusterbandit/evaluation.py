"""Oracle policies and the normalized return.

For a state ``s`` the uniformly random policy earns the mean reward over
actions and the optimal policy the maximum.  A policy choosing action ``j``
scores::

    R(j | s) = (r(s, j) - mean_a r(s, a)) / (max_a r(s, a) - mean_a r(s, a))

so random play scores 0 in expectation and optimal play scores 1.
"""
from dataclasses import dataclass
import logging

import numpy as np

from .env import sample_states

__all__ = [
    "EvalSet", "EvalRecord", "DegenerateStateError", "random_value", "optimal_value", "normalized_return",
    "normalized_returns", "evaluate_policy", "make_eval_set", "OracleAgent", "DENOMINATOR_FLOOR",
]

log = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12


class DegenerateStateError(ArithmeticError):
    """All actions earn (nearly) the same reward, so the normalized return is undefined."""


def random_value(env, s):
    return float(np.mean(env.reward_vector(s)))


def optimal_value(env, s):
    rv = env.reward_vector(s)
    j = int(np.argmax(rv))
    return float(rv[j]), j


def normalized_return(env, s, j):
    rv = env.reward_vector(s)
    return float(normalized_returns(rv[None, :], np.array([j]), strict=True)[0][0])


def normalized_returns(reward_rows, actions, strict=False):
    """Normalized returns for chosen ``actions`` given per-state reward vectors (one row per state).

    Returns ``(values, valid_mask)``; states whose optimum exceeds the mean by
    no more than 1e-12 are marked invalid (value NaN), or raise when ``strict``.
    """
    reward_rows = np.atleast_2d(reward_rows)
    actions = np.asarray(actions, dtype=np.int64)
    base = reward_rows.mean(axis=1)
    best = reward_rows.max(axis=1)
    denom = best - base
    valid = denom > DENOMINATOR_FLOOR
    if strict and not np.all(valid):
        raise DegenerateStateError("optimal and random values coincide; normalized return undefined")
    chosen = reward_rows[np.arange(actions.size), actions]
    out = np.full(actions.size, np.nan)
    out[valid] = (chosen[valid] - base[valid]) / denom[valid]
    # the optimal action scores exactly one, whatever the rounding of the quotient
    out[valid & (chosen == best)] = 1.0
    return out, valid


@dataclass
class EvalSet:
    """Frozen evaluation states with their (true) reward vectors."""
    states: np.ndarray
    rewards: np.ndarray
    seed_label: str = ""

    @property
    def size(self):
        return self.states.shape[0]


def make_eval_set(env, rng, n=512, label=""):
    states = sample_states(env, rng, n)
    return EvalSet(states, env.reward_matrix(states), label)


@dataclass
class EvalRecord:
    step: int
    mean_R: float
    min_R: float
    max_R: float
    n_excluded_states: int
    n_states: int = 0


class OracleAgent:
    """Picks the action that is best for whatever it observes, using the true reward function.

    On a full environment this is the optimal policy; on a clustered one it
    is the best policy that only sees cluster centroids.
    """

    algorithm = "oracle"
    stochastic_greedy = False

    def __init__(self, env):
        self.env = env

    def greedy(self, obs_batch, rng=None):
        return np.array([int(np.argmax(self.env.reward_vector(o))) for o in np.atleast_2d(obs_batch)])


def evaluate_policy(agent, env, eval_set, step=0, rng=None, n_draws=1):
    """Score the agent's greedy actions on every evaluation state against the true reward.

    ``env`` may be a clustered environment, in which case the agent sees the
    clustered observation.  Agents whose greedy choice is random (the uniform
    baseline) are sampled ``n_draws`` times per state with ``rng``.
    """
    obs = env.observe(eval_set.states)
    draws = n_draws if getattr(agent, "stochastic_greedy", False) else 1
    per_state = np.zeros(eval_set.size)
    for _ in range(draws):
        actions = agent.greedy(obs, rng)
        vals, valid = normalized_returns(eval_set.rewards, actions)
        per_state += np.where(valid, vals, 0.0)
    per_state /= draws
    kept = per_state[valid]
    n_excl = int((~valid).sum())
    if n_excl:
        log.warning("%d of %d evaluation states excluded (degenerate normalization)", n_excl, eval_set.size)
    if kept.size == 0:
        return EvalRecord(step, float("nan"), float("nan"), float("nan"), n_excl, eval_set.size)
    return EvalRecord(step, float(kept.mean()), float(kept.min()), float(kept.max()), n_excl, eval_set.size)
