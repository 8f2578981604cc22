"""Plain k-means (Lloyd iterations, Forgy initialization) and the clustered environment.

The clustered environment only changes what the agent *observes*: rewards
are always computed by the base environment on the true state.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from . import kernels
from .env import sample_states

__all__ = [
    "ClusterModel", "ClusteredEnvironment", "kmeans_fit", "assign_cluster", "clusterize_environment",
    "inertia_of", "REPRESENTATIONS",
]

log = logging.getLogger(__name__)

REPRESENTATIONS = ("centroid", "one-hot")


@dataclass
class ClusterModel:
    centroids: np.ndarray
    n_iter: int = 0
    inertia: float = float("nan")
    n_samples: int = 0
    converged: bool = False
    inertia_history: list = field(default_factory=list)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    def assign(self, points):
        """Cluster indices of a batch of points (rows)."""
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if points.shape[1] != self.dim:
            raise ValueError(f"points of width {points.shape[1]}, centroids of width {self.dim}")
        return kernels.nearest_centroid(points, self.centroids)[0]

    def to_arrays(self, prefix):
        return {
            f"{prefix}/centroids": self.centroids,
            f"{prefix}/meta": np.array([self.n_iter, self.n_samples, int(self.converged)], dtype=np.int64),
            f"{prefix}/inertia": np.array(self.inertia_history + [self.inertia], dtype=np.float64),
        }

    @classmethod
    def from_arrays(cls, prefix, data):
        n_iter, n_samples, converged = (int(v) for v in data[f"{prefix}/meta"])
        inertia = [float(v) for v in data[f"{prefix}/inertia"]]
        return cls(np.ascontiguousarray(data[f"{prefix}/centroids"], dtype=np.float64), n_iter, inertia[-1],
                   n_samples, bool(converged), inertia[:-1])


def inertia_of(points, centroids):
    return float(kernels.nearest_centroid(points, centroids)[1].sum())


def _forgy(points, k, rng):
    """k distinct data points, picked uniformly at random (duplicates in the data are skipped)."""
    order = rng.permutation(points.shape[0])
    chosen, seen = [], set()
    for idx in order:
        key = points[idx].tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(idx)
        if len(chosen) == k:
            return points[np.array(chosen)].copy()
    raise ValueError(f"only {len(chosen)} distinct points available for k={k} clusters")


def _lloyd(points, centroids, max_iter, tol):
    history = []
    labels, d2 = kernels.nearest_centroid(points, centroids)
    k = centroids.shape[0]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        history.append(float(d2.sum()))
        sums, counts = kernels.accumulate_centroids(points, labels, k)
        new = centroids.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            # reseed each empty centroid at the point farthest from its own centroid
            taken = set()
            far = np.argsort(-d2, kind="stable")
            pos = 0
            for c in empty:
                while far[pos] in taken:
                    pos += 1
                taken.add(far[pos])
                new[c] = points[far[pos]]
        shift = float(np.max(np.sqrt(((new - centroids) ** 2).sum(axis=1))))
        centroids = new
        labels, d2 = kernels.nearest_centroid(points, centroids)
        current = float(d2.sum())
        if current > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"k-means inertia increased at iteration {it}: {history[-1]} -> {current}")
        if shift < tol:
            converged = True
            break
    history.append(float(d2.sum()))
    return centroids, labels, history, it, converged


def kmeans_fit(points, k, max_iter=100, tol=1e-6, rng=None, n_restarts=1):
    """Fit k centroids with Lloyd's algorithm; keep the best of ``n_restarts`` runs.

    Each run starts from k distinct data points chosen uniformly (Forgy) and
    stops once no centroid moves by ``tol`` or more, or after ``max_iter``
    iterations.  Inertia is checked to be non-increasing at every iteration.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < k:
        raise ValueError(f"cannot fit {k} clusters to {n} points")
    if not np.all(np.isfinite(points)):
        raise ValueError("points contain non-finite entries")
    if rng is None:
        raise ValueError("kmeans_fit needs an explicit random stream")
    best = None
    for _ in range(max(1, n_restarts)):
        init = _forgy(points, k, rng)
        centroids, _, history, n_iter, converged = _lloyd(points, init, max_iter, tol)
        if best is None or history[-1] < best.inertia:
            best = ClusterModel(centroids, n_iter, history[-1], n, converged, history[:-1])
    if not best.converged:
        log.info("k-means stopped at max_iter=%d without reaching tol=%g", max_iter, tol)
    return best


def assign_cluster(model, point):
    point = np.asarray(point, dtype=float)
    if point.shape != (model.dim,):
        raise ValueError(f"point of shape {point.shape}, centroids of width {model.dim}")
    return int(model.assign(point[None, :])[0])


class ClusteredEnvironment:
    """Wraps an environment so the agent observes a cluster representative of each state."""

    def __init__(self, base, model, representation="centroid"):
        if representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}, got {representation!r}")
        if model.dim != base.config.d_state:
            raise ValueError("cluster model dimension differs from the state dimension")
        self.base = base
        self.model = model
        self.representation = representation
        self.config = base.config

    @property
    def n_actions(self):
        return self.base.n_actions

    @property
    def d_state(self):
        return self.base.d_state

    @property
    def observation_dim(self):
        return self.base.config.d_state if self.representation == "centroid" else self.model.k

    def observe(self, states):
        """Observation(s) for a state or batch of states."""
        states = np.asarray(states, dtype=float)
        single = states.ndim == 1
        labels = self.model.assign(states)
        if self.representation == "centroid":
            obs = self.model.centroids[labels]
        else:
            obs = np.zeros((labels.size, self.model.k))
            obs[np.arange(labels.size), labels] = 1.0
        return obs[0] if single else obs

    def reward(self, s, j):
        return self.base.reward(s, j)

    def reward_vector(self, s):
        return self.base.reward_vector(s)

    def reward_matrix(self, states):
        return self.base.reward_matrix(states)

    def __repr__(self):
        return f"ClusteredEnvironment(k={self.model.k}, representation={self.representation!r}, base={self.base!r})"


def clusterize_environment(env, n_fit_samples=100_000, k=100, mode="centroid", rng=None, max_iter=100,
                           tol=1e-6, n_restarts=1):
    """Sample states uniformly, fit k-means on them and wrap ``env``."""
    if n_fit_samples < k:
        raise ValueError(f"n_fit_samples={n_fit_samples} must be at least k={k}")
    if rng is None:
        raise ValueError("clusterize_environment needs an explicit random stream")
    pts = sample_states(env, rng, n_fit_samples)
    model = kmeans_fit(pts, k, max_iter=max_iter, tol=tol, rng=rng, n_restarts=n_restarts)
    return ClusteredEnvironment(env, model, mode)
