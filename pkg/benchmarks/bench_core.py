"""Benchmark the compiled hot kernels against the numpy fallbacks.

Run after an editable install:

    python3 benchmarks/bench_core.py

Reports wall times and the max absolute deviation between backends.
"""

import time

import numpy as np

from fractrans._core import _fallback

try:
    from fractrans._core import _kernels
except ImportError:
    _kernels = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_caputo(m=4000, beta=0.5, dt=1e-3):
    rng = np.random.default_rng(0)
    values = np.cumsum(rng.normal(size=m + 1)) * dt
    t_py, ref = timeit(_fallback.caputo_l1_apply, values, beta, dt)
    print(f"caputo_l1_apply (M={m}): fallback {t_py * 1e3:8.2f} ms", end="")
    if _kernels is not None:
        t_cy, out = timeit(_kernels.caputo_l1_apply, values, beta, dt)
        dev = float(np.max(np.abs(out - ref)))
        print(f" | compiled {t_cy * 1e3:8.2f} ms | x{t_py / t_cy:5.1f} | dev {dev:.2e}")
    else:
        print(" | compiled extension not built")


def bench_repulsion(n=2000, m=2000, d=2):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(n, d))
    y = rng.normal(size=(m, d))
    w = rng.uniform(0.1, 1.0, size=m)
    t_py, ref = timeit(_fallback.pairwise_repulsion_sum, x, y, w, repeat=3)
    print(f"pairwise_repulsion_sum (N=M={n}, d={d}): fallback {t_py * 1e3:8.2f} ms", end="")
    if _kernels is not None:
        t_cy, out = timeit(_kernels.pairwise_repulsion_sum, x, y, w, repeat=3)
        dev = float(np.max(np.abs(out - ref)))
        print(f" | compiled {t_cy * 1e3:8.2f} ms | x{t_py / t_cy:5.1f} | dev {dev:.2e}")
    else:
        print(" | compiled extension not built")


if __name__ == "__main__":
    bench_caputo()
    bench_repulsion()
