"""Pure-numpy versions of the compiled kernels.

Squared distances are summed one coordinate at a time (not with a
vectorized reduction) so the rounding matches the compiled loops exactly.
"""
import numpy as np

_CHUNK_ELEMS = 1 << 21


def nearest_centroid(X, C):
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = X.shape
    k = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    step = max(1, _CHUNK_ELEMS // max(k, 1))
    for lo in range(0, n, step):
        xs = X[lo:lo + step]
        acc = np.zeros((xs.shape[0], k))
        for t in range(d):
            diff = xs[:, t, None] - C[None, :, t]
            acc += diff * diff
        # argmin returns the first minimum, matching the strict '<' scan
        arg = np.argmin(acc, axis=1)
        labels[lo:lo + step] = arg
        dist[lo:lo + step] = acc[np.arange(xs.shape[0]), arg]
    return labels, dist


def accumulate_centroids(X, labels, k):
    X = np.ascontiguousarray(X, dtype=np.float64)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def pairwise_distances(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    i, j = np.triu_indices(n, k=1)
    acc = np.zeros(i.size)
    for t in range(d):
        col = X[:, t]
        diff = col[i] - col[j]
        acc += diff * diff
    return np.sqrt(acc)
