#!/usr/bin/env python3
"""Time the compiled kernels against their pure-numpy fallbacks.

Usage:  python3 bench/benchmark_kernels.py [--repeats 5] [--quick]

Both implementations of each kernel are called on the same inputs in one
process, so the numbers are directly comparable regardless of the
GPM_NO_NUMBA setting.  The numba path is called once per input before
timing to exclude JIT compilation; each timing is the best of the
repeats.  The last column reports the max absolute difference between
the two paths, which should sit at the rounding level.
"""
import argparse
import time

import numpy as np

from gpm import _kernels
from gpm.polynomial import Polynomial


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def random_poly(rng, n_vars, degree, n_terms):
    p = Polynomial.zero(n_vars)
    for _ in range(n_terms):
        term = Polynomial.constant(int(rng.integers(-9, 10)) or 1, n_vars)
        for v in rng.integers(1, n_vars + 1, size=rng.integers(1, degree + 1)):
            term = term * Polynomial.variable(int(v), n_vars)
        p = p + term
    return p


def bench_poly_eval(rng, n_points, repeats, rows):
    poly = random_poly(rng, n_vars=4, degree=5, n_terms=24)
    coefs, starts, var_idx, powers = poly._compile()
    points = np.ascontiguousarray(rng.standard_normal((n_points, 4)))
    args = (points, coefs, starts, var_idx, powers)
    ref = _kernels._poly_eval_batch_numpy(*args)
    if _kernels.HAS_NUMBA:
        out = _kernels._poly_eval_batch_numba(*args)  # warm the JIT
        t_nb = best_time(lambda: _kernels._poly_eval_batch_numba(*args), repeats)
    else:
        out, t_nb = ref, float("nan")
    t_np = best_time(lambda: _kernels._poly_eval_batch_numpy(*args), repeats)
    scale = np.max(np.abs(ref)) or 1.0
    rows.append(("poly_eval_batch", f"{n_points} pts, 24 terms", t_np, t_nb,
                 np.max(np.abs(out - ref)) / scale))


def bench_bin_1d(rng, n_points, repeats, rows):
    x = np.ascontiguousarray(rng.standard_normal(n_points))
    args = (x, -8.0, 16.0 / 4095, 4096)
    ref = _kernels._linear_bin_1d_numpy(*args)
    if _kernels.HAS_NUMBA:
        out = _kernels._linear_bin_1d_numba(*args)
        t_nb = best_time(lambda: _kernels._linear_bin_1d_numba(*args), repeats)
    else:
        out, t_nb = ref, float("nan")
    t_np = best_time(lambda: _kernels._linear_bin_1d_numpy(*args), repeats)
    rows.append(("linear_bin_1d", f"{n_points} pts, 4096 bins", t_np, t_nb,
                 np.max(np.abs(out - ref)) / n_points))


def bench_bin_2d(rng, n_points, repeats, rows):
    xy = np.ascontiguousarray(rng.standard_normal((n_points, 2)))
    args = (xy, -8.0, 16.0 / 255, 256, -8.0, 16.0 / 255, 256)
    ref = _kernels._linear_bin_2d_numpy(*args)
    if _kernels.HAS_NUMBA:
        out = _kernels._linear_bin_2d_numba(*args)
        t_nb = best_time(lambda: _kernels._linear_bin_2d_numba(*args), repeats)
    else:
        out, t_nb = ref, float("nan")
    t_np = best_time(lambda: _kernels._linear_bin_2d_numpy(*args), repeats)
    rows.append(("linear_bin_2d", f"{n_points} pts, 256x256", t_np, t_nb,
                 np.max(np.abs(out - ref)) / n_points))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timings per kernel (keep best)")
    ap.add_argument("--quick", action="store_true", help="smaller inputs, for smoke tests")
    args = ap.parse_args()

    n = 100_000 if args.quick else 1_000_000
    rng = np.random.default_rng(0)
    rows: list[tuple] = []
    bench_poly_eval(rng, n, args.repeats, rows)
    bench_bin_1d(rng, n, args.repeats, rows)
    bench_bin_2d(rng, n, args.repeats, rows)

    print(f"numba available: {_kernels.HAS_NUMBA}   active path: "
          f"{'numba' if _kernels.USE_NUMBA else 'numpy'}")
    header = f"{'kernel':<18} {'input':<22} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max rel diff':>13}"
    print(header)
    print("-" * len(header))
    for name, size, t_np, t_nb, diff in rows:
        speed = t_np / t_nb if t_nb == t_nb and t_nb > 0 else float("nan")
        print(f"{name:<18} {size:<22} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} "
              f"{speed:>7.1f}x {diff:>13.2e}")


if __name__ == "__main__":
    main()
