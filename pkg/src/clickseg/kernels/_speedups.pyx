# cython: boundscheck=False, wraparound=False, cdivision=True
"""Brute-force distance kernels, compiled.

Must stay numerically identical to kernels._fallback: same accumulation
order (dx*dx + dy*dy + dz*dz), strict < comparisons so ties keep the
lowest reference index.
"""

import numpy as np

from libc.math cimport sqrt

cimport numpy as cnp

cnp.import_array()


def nearest_neighbor(double[:, ::1] query, double[:, ::1] ref):
    """For each query point return (index, squared distance) of its
    nearest reference point; ties resolve to the lowest index."""
    cdef Py_ssize_t nq = query.shape[0]
    cdef Py_ssize_t nr = ref.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.empty(nq, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best = np.empty(nq, dtype=np.float64)
    cdef long long[::1] idx_v = idx
    cdef double[::1] best_v = best
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, d, b
    cdef long long bi
    for i in range(nq):
        b = np.inf
        bi = 0
        for j in range(nr):
            dx = query[i, 0] - ref[j, 0]
            dy = query[i, 1] - ref[j, 1]
            dz = query[i, 2] - ref[j, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < b:
                b = d
                bi = j
        idx_v[i] = bi
        best_v[i] = b
    return idx, best


def response_matrix(double[:, ::1] sources, double[:, ::1] targets):
    """Negative Euclidean distance from each source to each target,
    shape (len(sources), len(targets))."""
    cdef Py_ssize_t ns = sources.shape[0]
    cdef Py_ssize_t nt = targets.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((ns, nt), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz
    for i in range(ns):
        for j in range(nt):
            dx = sources[i, 0] - targets[j, 0]
            dy = sources[i, 1] - targets[j, 1]
            dz = sources[i, 2] - targets[j, 2]
            out_v[i, j] = -sqrt(dx * dx + dy * dy + dz * dz)
    return out
