# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nearest-centroid, centroid-accumulation and pairwise-distance kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def nearest_centroid(const double[:, ::1] X, const double[:, ::1] C):
    """Index of the closest row of ``C`` for every row of ``X`` (ties -> lowest index)."""
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double best, acc, diff
    cdef Py_ssize_t arg
    labels_arr = np.empty(n, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[::1] dist = dist_arr
    with nogil:
        for i in range(n):
            best = INFINITY
            arg = 0
            for j in range(k):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - C[j, t]
                    acc = acc + diff * diff
                    # partial sums only grow, so abandoning here cannot change the argmin
                    if acc > best:
                        break
                if acc < best:
                    best = acc
                    arg = j
            labels[i] = arg
            dist[i] = best
    return labels_arr, dist_arr


def accumulate_centroids(const double[:, ::1] X, const cnp.int64_t[::1] labels, Py_ssize_t k):
    """Per-cluster coordinate sums (points visited in index order) and member counts."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, t, c
    sums_arr = np.zeros((k, d), dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    with nogil:
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for t in range(d):
                sums[c, t] = sums[c, t] + X[i, t]
    return sums_arr, counts_arr


def pairwise_distances(const double[:, ::1] X):
    """Condensed Euclidean distances over unordered pairs ``i < j`` (row-major pair order)."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t, p = 0
    cdef double acc, diff
    out_arr = np.empty(n * (n - 1) // 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - X[j, t]
                    acc = acc + diff * diff
                out[p] = sqrt(acc)
                p += 1
    return out_arr
