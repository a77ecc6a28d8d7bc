"""Pure-numpy twins of the compiled kernels.

Accumulation order matches _speedups.pyx (x then y then z, strict <)
so both backends return bit-identical results.
"""

import numpy as np

# query chunk size bounding the (chunk, n_ref) temporary
_CHUNK = 2048


def nearest_neighbor(query, ref):
    query = np.ascontiguousarray(query, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    nq = query.shape[0]
    idx = np.empty(nq, dtype=np.int64)
    best = np.empty(nq, dtype=np.float64)
    for lo in range(0, nq, _CHUNK):
        hi = min(lo + _CHUNK, nq)
        diff = query[lo:hi, None, :] - ref[None, :, :]
        d2 = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2
        # argmin returns the first occurrence: lowest-index tie-break
        j = np.argmin(d2, axis=1)
        idx[lo:hi] = j
        best[lo:hi] = d2[np.arange(hi - lo), j]
    return idx, best


def response_matrix(sources, targets):
    sources = np.ascontiguousarray(sources, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    ns = sources.shape[0]
    out = np.empty((ns, targets.shape[0]), dtype=np.float64)
    for i in range(ns):
        diff = sources[i, None, :] - targets
        d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
        out[i] = -np.sqrt(d2)
    return out
