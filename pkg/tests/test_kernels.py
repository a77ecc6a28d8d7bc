import numpy as np
import pytest

from clickseg.kernels import _fallback
from clickseg import kernels


def brute_nn(query, ref):
    idx = np.empty(len(query), dtype=np.int64)
    best = np.empty(len(query))
    for i, q in enumerate(query):
        d = ((ref - q) ** 2).sum(axis=1)
        idx[i] = int(np.argmin(d))
        best[i] = d[idx[i]]
    return idx, best


def test_nearest_neighbor_matches_bruteforce(rng):
    query = rng.normal(size=(80, 3))
    ref = rng.normal(size=(60, 3))
    idx, d2 = kernels.nearest_neighbor(query, ref)
    bidx, bd2 = brute_nn(query, ref)
    np.testing.assert_array_equal(idx, bidx)
    np.testing.assert_allclose(d2, bd2, rtol=1e-12)


def test_backends_bit_identical(rng):
    query = rng.normal(size=(120, 3))
    ref = rng.normal(size=(90, 3))
    idx_a, d2_a = kernels._impl.nearest_neighbor(
        np.ascontiguousarray(query), np.ascontiguousarray(ref)
    )
    idx_b, d2_b = _fallback.nearest_neighbor(query, ref)
    np.testing.assert_array_equal(idx_a, idx_b)
    assert (d2_a == d2_b).all()
    r_a = kernels._impl.response_matrix(np.ascontiguousarray(query), np.ascontiguousarray(ref))
    r_b = _fallback.response_matrix(query, ref)
    assert (r_a == r_b).all()


def test_tie_break_lowest_index():
    ref = np.array([[1.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0]])
    idx, _ = kernels.nearest_neighbor(np.zeros((1, 3)), ref)
    assert idx[0] == 0


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        kernels.nearest_neighbor(np.zeros((1, 3)), np.zeros((0, 3)))


def test_response_matrix_is_negative_distance(rng):
    s = rng.normal(size=(5, 3))
    t = rng.normal(size=(7, 3))
    r = kernels.response_matrix(s, t)
    for i in range(5):
        for j in range(7):
            assert r[i, j] == pytest.approx(-np.linalg.norm(s[i] - t[j]), rel=1e-12)
