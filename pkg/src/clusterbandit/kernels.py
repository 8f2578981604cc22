"""Backend selection for the hot numerical kernels.

The compiled extension is used when it was built; otherwise (or when
``CLUSTERBANDIT_PURE_PYTHON=1`` is set) the numpy fallback is used.
"""
import os

from ._ext import fallback

if os.environ.get("CLUSTERBANDIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = fallback
    BACKEND = "python"
else:
    try:
        from ._ext import kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = fallback
        BACKEND = "python"

nearest_centroid = _impl.nearest_centroid
accumulate_centroids = _impl.accumulate_centroids
pairwise_distances = _impl.pairwise_distances

__all__ = ["BACKEND", "nearest_centroid", "accumulate_centroids", "pairwise_distances", "fallback"]
