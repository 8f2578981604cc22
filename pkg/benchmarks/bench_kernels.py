"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time of each backend, the
speedup, and whether both backends returned identical results.
"""
import argparse
import time

import numpy as np

from clusterbandit._ext import fallback
from clusterbandit.clustering import kmeans_fit

try:
    from clusterbandit._ext import kernels as compiled
except ImportError:
    compiled = None


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (100_000, 100))
    cents = np.ascontiguousarray(pts[rng.choice(len(pts), 100, replace=False)])
    labels = rng.integers(100, size=len(pts))
    members = np.ascontiguousarray(pts[:600])

    cases = [
        ("nearest_centroid 1e5x100, k=100", lambda m: m.nearest_centroid(pts, cents)),
        ("accumulate_centroids 1e5x100, k=100", lambda m: m.accumulate_centroids(pts, labels, 100)),
        ("pairwise_distances 600x100", lambda m: m.pairwise_distances(members)),
    ]
    print(f"{'kernel':40s} {'cython s':>10s} {'numpy s':>10s} {'speedup':>8s}  identical")
    for name, fn in cases:
        tc, oc = best_time(lambda: fn(compiled), args.repeat)
        tp, op = best_time(lambda: fn(fallback), args.repeat)
        print(f"{name:40s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {same(oc, op)}")

    # end to end: one k-means fit at the grid scale, through the public API
    import clusterbandit.clustering as cl
    timings = {}
    saved = cl.kernels.nearest_centroid, cl.kernels.accumulate_centroids
    try:
        for label, impl in (("cython", compiled), ("numpy", fallback)):
            cl.kernels.nearest_centroid = impl.nearest_centroid
            cl.kernels.accumulate_centroids = impl.accumulate_centroids
            t0 = time.perf_counter()
            model = kmeans_fit(pts, 100, rng=np.random.default_rng(1), max_iter=20)
            timings[label] = (time.perf_counter() - t0, model.inertia)
    finally:
        cl.kernels.nearest_centroid, cl.kernels.accumulate_centroids = saved
    print(f"{'kmeans_fit 1e5x100, k=100, 20 iters':40s} {timings['cython'][0]:10.4f} {timings['numpy'][0]:10.4f} "
          f"{timings['numpy'][0] / timings['cython'][0]:8.1f}  {timings['cython'][1] == timings['numpy'][1]}")


if __name__ == "__main__":
    main()
