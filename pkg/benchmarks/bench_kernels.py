"""Compare the compiled distance kernels against the pure-numpy
fallback.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from clickseg import kernels
from clickseg.kernels import _fallback

SIZES = [(1_000, 100), (10_000, 300), (50_000, 1_000), (200_000, 2_000)]
REPEATS = 5


def timeit(fn, *args):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    if kernels.BACKEND != "compiled":
        print("compiled backend unavailable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'n_query':>9} {'n_ref':>7} {'kernel':>16} "
          f"{'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for n_query, n_ref in SIZES:
        query = np.ascontiguousarray(rng.normal(size=(n_query, 3)))
        ref = np.ascontiguousarray(rng.normal(size=(n_ref, 3)))
        for name, compiled, fallback, args in (
            ("nearest_neighbor", kernels._impl.nearest_neighbor,
             _fallback.nearest_neighbor, (query, ref)),
            ("response_matrix", kernels._impl.response_matrix,
             _fallback.response_matrix, (ref, query)),
        ):
            tc = timeit(compiled, *args)
            tf = timeit(fallback, *args)
            print(f"{n_query:>9} {n_ref:>7} {name:>16} "
                  f"{tc * 1e3:>8.2f}ms {tf * 1e3:>8.2f}ms {tf / tc:>7.2f}x")


if __name__ == "__main__":
    main()
