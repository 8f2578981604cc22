"""Reward-structure diagnostics.

Two probes of how much the raw state geometry says about rewards:

* the rewards of a few nearly identical states on the first actions;
* per k-means cluster, the correlation between pairwise state distances and
  the distances of the corresponding reward vectors.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clustering import kmeans_fit
from .env import sample_states

__all__ = [
    "UndefinedCorrelationError", "CorrelationResult", "pearson", "adjacent_state_reward_table",
    "cluster_reward_correlation",
]

VARIANCE_FLOOR = 1e-18


class UndefinedCorrelationError(ArithmeticError):
    pass


def pearson(x, y):
    """Sample Pearson correlation of two equally long vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two 1-D vectors of equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise UndefinedCorrelationError("need at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    n = x.size
    if sxx / n <= VARIANCE_FLOOR or syy / n <= VARIANCE_FLOOR:
        raise UndefinedCorrelationError("zero variance; correlation undefined")
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


def adjacent_state_reward_table(env, rng, n_states=5, n_actions_shown=10, sigma=0.01):
    """Rewards of ``n_states`` states drawn from N(0, sigma^2) per coordinate on the first actions.

    Rows are states, columns are actions ``0 .. n_actions_shown - 1``.
    """
    if n_actions_shown > env.n_actions:
        raise ValueError(f"cannot show {n_actions_shown} of {env.n_actions} actions")
    states = rng.normal(0.0, sigma, (n_states, env.d_state)) if sigma > 0 else np.zeros((n_states, env.d_state))
    return np.stack([env.reward_vector(s)[:n_actions_shown] for s in states])


@dataclass
class CorrelationResult:
    rho: np.ndarray
    n_members: np.ndarray
    n_pairs: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def defined(self):
        return np.isfinite(self.rho)

    def mean_defined(self):
        vals = self.rho[self.defined]
        return float(vals.mean()) if vals.size else float("nan")


def cluster_reward_correlation(env, rng, n_samples=100_000, k=100, max_iter=100, tol=1e-6, states=None):
    """Per-cluster correlation between state distances and reward-vector distances.

    Pairs are unordered and exclude self-pairs; both distances are Euclidean.
    Clusters with fewer than two members, or with zero variance on either
    side, get ``NaN`` and a flag naming the reason.
    """
    if n_samples < k:
        raise ValueError(f"n_samples={n_samples} must be at least k={k}")
    if states is None:
        states = sample_states(env, rng, n_samples)
    model = kmeans_fit(states, k, max_iter=max_iter, tol=tol, rng=rng)
    labels = model.assign(states)
    rewards = env.reward_matrix(states)
    rho = np.full(k, np.nan)
    members = np.bincount(labels, minlength=k)
    pairs = members * (members - 1) // 2
    flags = []
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            flags.append((c, "fewer than two members"))
            continue
        ds = kernels.pairwise_distances(np.ascontiguousarray(states[idx]))
        dr = kernels.pairwise_distances(np.ascontiguousarray(rewards[idx]))
        try:
            rho[c] = pearson(ds, dr)
        except UndefinedCorrelationError as exc:
            flags.append((c, str(exc)))
    return CorrelationResult(rho, members, pairs, flags)
