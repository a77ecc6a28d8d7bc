"""Distance kernels: compiled extension when available, numpy fallback
otherwise. Set CLICKSEG_PURE_PYTHON=1 to force the fallback."""

import os

from . import _fallback

if os.environ.get("CLICKSEG_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"


def nearest_neighbor(query, ref):
    """Index and squared distance of the nearest `ref` row for each
    `query` row; ties go to the lowest index."""
    import numpy as np

    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    if r.shape[0] == 0:
        raise ValueError("reference set is empty")
    return _impl.nearest_neighbor(q, r)


def response_matrix(sources, targets):
    """Matrix of negative Euclidean distances, shape (S, T)."""
    import numpy as np

    s = np.ascontiguousarray(sources, dtype=np.float64)
    t = np.ascontiguousarray(targets, dtype=np.float64)
    return _impl.response_matrix(s, t)


def min_dist2(points, others):
    """Squared distance from each point to its nearest neighbor in `others`."""
    return nearest_neighbor(points, others)[1]
