import numpy as np
import pytest

from clusterbandit import kernels
from clusterbandit._ext import fallback
from oracles import nearest_scan

try:
    from clusterbandit._ext import kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", [fallback, pytest.param(compiled, marks=needs_ext)],
                         ids=["python", "cython"])
def test_nearest_centroid_matches_linear_scan(impl):
    rng = np.random.default_rng(0)
    C = rng.uniform(-1, 1, (7, 3))
    X = rng.uniform(-1, 1, (1000, 3))
    labels, d2 = impl.nearest_centroid(X, C)
    assert labels.tolist() == [nearest_scan(x, C) for x in X.tolist()]
    assert np.allclose(d2, ((X - C[labels]) ** 2).sum(axis=1), rtol=1e-14)


@pytest.mark.parametrize("impl", [fallback, pytest.param(compiled, marks=needs_ext)],
                         ids=["python", "cython"])
def test_ties_go_to_lowest_index(impl):
    C = np.array([[5.0, 5.0], [-1.0, 0.0], [3.0, 3.0], [4.0, 4.0], [1.0, 0.0]])
    labels, _ = impl.nearest_centroid(np.array([[0.0, 0.0]]), C)
    assert labels[0] == 1


@needs_ext
def test_backends_agree_bit_for_bit():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (3000, 17))
    C = X[rng.choice(3000, 40, replace=False)].copy()
    la, da = compiled.nearest_centroid(X, C)
    lb, db = fallback.nearest_centroid(X, C)
    assert np.array_equal(la, lb) and np.array_equal(da, db)
    sa, ca = compiled.accumulate_centroids(X, la, 40)
    sb, cb = fallback.accumulate_centroids(X, la, 40)
    assert np.array_equal(sa, sb) and np.array_equal(ca, cb)
    Y = X[:300]
    assert np.array_equal(compiled.pairwise_distances(Y), fallback.pairwise_distances(Y))


@pytest.mark.parametrize("impl", [fallback, pytest.param(compiled, marks=needs_ext)],
                         ids=["python", "cython"])
def test_pairwise_distances_condensed_order(impl):
    X = np.array([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])
    assert impl.pairwise_distances(X).tolist() == [5.0, 10.0, 5.0]
    assert impl.pairwise_distances(X[:1]).size == 0


def test_environment_variable_forces_fallback():
    import subprocess
    import sys
    code = "import clusterbandit.kernels as k; print(k.BACKEND)"
    env = dict(__import__("os").environ, CLUSTERBANDIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
