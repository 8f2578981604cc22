import numpy as np
import pytest

from clusterbandit.clustering import (ClusterModel, ClusteredEnvironment, assign_cluster, clusterize_environment,
                                      inertia_of, kmeans_fit)
from clusterbandit.env import load_environment, reward, sample_states, save_environment
from clusterbandit.rng import derive_stream
from oracles import best_partition_inertia, nearest_scan


def test_single_cluster_is_the_mean():
    pts = derive_stream(0, "p").uniform(-1, 1, (50, 3))
    model = kmeans_fit(pts, 1, rng=derive_stream(0, "k"))
    assert np.allclose(model.centroids[0], pts.mean(axis=0), atol=1e-14)


def test_n_equals_k_is_a_perfect_fit():
    pts = derive_stream(1, "p").uniform(-1, 1, (6, 2))
    model = kmeans_fit(pts, 6, rng=derive_stream(1, "k"))
    assert model.inertia == 0.0
    assert sorted(map(tuple, model.centroids)) == sorted(map(tuple, pts))


def test_six_points_two_clusters_matches_exhaustive_optimum():
    pts = np.array([[0.0, 0.0], [0.2, 0.1], [0.1, 0.3], [2.0, 2.0], [2.3, 1.9], [1.0, 1.2]])
    model = kmeans_fit(pts, 2, rng=derive_stream(2, "k"), n_restarts=50)
    assert abs(model.inertia - best_partition_inertia(pts.tolist(), 2)) < 1e-9


def test_errors():
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((2, 2)), 3, rng=derive_stream(0, "k"))
    with pytest.raises(ValueError):
        kmeans_fit(np.array([[0.0, np.nan], [1.0, 1.0]]), 1, rng=derive_stream(0, "k"))
    with pytest.raises(ValueError):
        # two distinct points cannot seed three distinct centroids
        kmeans_fit(np.array([[0.0], [0.0], [1.0]]), 3, rng=derive_stream(0, "k"))


def test_inertia_history_non_increasing_and_fixed_point():
    pts = derive_stream(3, "p").uniform(-1, 1, (2000, 4))
    model = kmeans_fit(pts, 12, rng=derive_stream(3, "k"))
    hist = model.inertia_history + [model.inertia]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))
    assert model.converged
    labels = model.assign(pts)
    recentered = np.stack([pts[labels == c].mean(axis=0) for c in range(12)])
    assert np.max(np.abs(recentered - model.centroids)) < 1e-6
    assert len({tuple(c) for c in model.centroids}) == 12


def test_empty_cluster_is_reseeded():
    # a far-away duplicate initial centroid would otherwise stay empty
    pts = np.vstack([np.zeros((5, 2)) + [0, i * 1e-3] for i in range(1)] + [np.array([[10.0, 10.0], [10.0, 10.1]])])
    model = kmeans_fit(pts, 3, rng=derive_stream(4, "k"), n_restarts=5)
    assert model.k == 3 and np.isfinite(model.inertia)


def test_assign_cluster_examples():
    model = ClusterModel(np.array([[5.0, 5.0], [-1.0, 0.0], [3.0, 3.0], [4.0, -4.0], [1.0, 0.0]]))
    assert assign_cluster(model, np.array([4.0, -4.0])) == 3
    assert assign_cluster(model, np.array([0.0, 0.0])) == 1
    with pytest.raises(ValueError):
        assign_cluster(model, np.zeros(3))


def test_assignment_matches_brute_force_scan():
    rng = derive_stream(5, "a")
    model = ClusterModel(rng.uniform(-1, 1, (9, 3)))
    pts = rng.uniform(-1, 1, (1000, 3))
    assert model.assign(pts).tolist() == [nearest_scan(p, model.centroids.tolist()) for p in pts.tolist()]


def test_inertia_of_matches_definition():
    rng = derive_stream(6, "i")
    pts = rng.uniform(-1, 1, (100, 2))
    C = rng.uniform(-1, 1, (4, 2))
    d = ((pts[:, None, :] - C[None]) ** 2).sum(-1).min(axis=1).sum()
    assert abs(inertia_of(pts, C) - d) < 1e-12


@pytest.fixture
def clustered(small_env):
    return clusterize_environment(small_env, 2000, 16, "centroid", derive_stream(0, "cluster"))


def test_clustered_observations_and_rewards(small_env, clustered):
    states = sample_states(small_env, derive_stream(7, "s"), 500)
    obs = clustered.observe(states)
    labels = clustered.model.assign(states)
    assert obs.shape == (500, 6)
    for i in range(500):
        j = i % small_env.n_actions
        assert clustered.reward(states[i], j) == reward(small_env, states[i], j)
    same = np.flatnonzero(labels == labels[0])
    assert all(np.array_equal(obs[same[0]], obs[i]) for i in same)
    assert len({o.tobytes() for o in obs}) <= 16
    assert clustered.observation_dim == 6


def test_one_hot_mode(small_env, clustered):
    onehot = ClusteredEnvironment(small_env, clustered.model, "one-hot")
    states = sample_states(small_env, derive_stream(8, "s"), 50)
    obs = onehot.observe(states)
    assert obs.shape == (50, 16) and onehot.observation_dim == 16
    assert np.array_equal(obs.argmax(axis=1), clustered.model.assign(states))
    assert np.all(obs.sum(axis=1) == 1)
    assert onehot.observe(states[0]).shape == (16,)


def test_clusterize_defaults_follow_reference_scale():
    import inspect
    sig = inspect.signature(clusterize_environment)
    assert sig.parameters["n_fit_samples"].default == 100_000
    assert sig.parameters["k"].default == 100


def test_cluster_model_round_trips_with_environment(tmp_path, small_env, clustered):
    path = tmp_path / "env.npz"
    save_environment(small_env, path, clustered.model)
    _, model = load_environment(path)
    assert np.array_equal(model.centroids, clustered.model.centroids)
    assert model.inertia == clustered.model.inertia
    assert model.inertia_history == clustered.model.inertia_history
