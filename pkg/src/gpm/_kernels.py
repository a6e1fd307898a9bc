"""Hot numeric kernels: numba-compiled when available, pure numpy otherwise.

The two implementations of each kernel perform the same floating point
operations in the same order, so switching paths does not change results
beyond reproducible bit-identity within a path.  Set ``GPM_NO_NUMBA=1``
to force the numpy fallback (read once at import time).  The benchmark
in ``bench/benchmark_kernels.py`` times both paths side by side.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via GPM_NO_NUMBA instead
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA and os.environ.get("GPM_NO_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)


def set_thread_count(n: int) -> None:
    """Apply a thread cap to the compiled path (no-op on the numpy path)."""
    if HAS_NUMBA and n > 0:
        import numba

        numba.set_num_threads(n)


# ---------------------------------------------------------------------------
# batch evaluation of a sparse polynomial
#
# The polynomial is flattened into parallel arrays: monomial j owns the
# factor slice starts[j]:starts[j+1] of (var_idx, powers).  Powers are
# expanded by repeated multiplication so both paths multiply in the same
# order; results match the scalar evaluator up to float association.
# ---------------------------------------------------------------------------


def _poly_eval_batch_numpy(points, coefs, starts, var_idx, powers):
    n = points.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for j in range(coefs.shape[0]):
        term = np.full(n, coefs[j], dtype=np.float64)
        for f in range(starts[j], starts[j + 1]):
            col = points[:, var_idx[f]]
            for _ in range(powers[f]):
                term = term * col
        out += term
    return out


@njit(cache=True)
def _poly_eval_batch_numba(points, coefs, starts, var_idx, powers):  # pragma: no cover
    n = points.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for j in range(coefs.shape[0]):
            t = coefs[j]
            for f in range(starts[j], starts[j + 1]):
                x = points[i, var_idx[f]]
                for _ in range(powers[f]):
                    t = t * x
            acc = acc + t
        out[i] = acc
    return out


def poly_eval_batch(points, coefs, starts, var_idx, powers):
    points = np.ascontiguousarray(points, dtype=np.float64)
    if USE_NUMBA:
        return _poly_eval_batch_numba(points, coefs, starts, var_idx, powers)
    return _poly_eval_batch_numpy(points, coefs, starts, var_idx, powers)


# ---------------------------------------------------------------------------
# linear binning (the expensive half of the binned KDE)
#
# Each sample spreads weight 1 over the two bracketing grid nodes in
# proportion to proximity; samples outside the grid are dropped.  Both
# paths add all left-node contributions first, then all right-node ones,
# in sample order.
# ---------------------------------------------------------------------------


def _linear_bin_1d_numpy(x, lo, dx, nbins):
    p = (x - lo) / dx
    i0 = np.floor(p).astype(np.int64)
    frac = p - i0
    w = np.zeros(nbins, dtype=np.float64)
    keep = (i0 >= 0) & (i0 < nbins)
    np.add.at(w, i0[keep], 1.0 - frac[keep])
    i1 = i0 + 1
    keep = (i1 >= 0) & (i1 < nbins)
    np.add.at(w, i1[keep], frac[keep])
    return w


@njit(cache=True)
def _linear_bin_1d_numba(x, lo, dx, nbins):  # pragma: no cover
    n = x.shape[0]
    w = np.zeros(nbins, dtype=np.float64)
    i0 = np.empty(n, dtype=np.int64)
    frac = np.empty(n, dtype=np.float64)
    for s in range(n):
        p = (x[s] - lo) / dx
        i = np.int64(np.floor(p))
        i0[s] = i
        frac[s] = p - i
    for s in range(n):
        if 0 <= i0[s] < nbins:
            w[i0[s]] += 1.0 - frac[s]
    for s in range(n):
        i1 = i0[s] + 1
        if 0 <= i1 < nbins:
            w[i1] += frac[s]
    return w


def linear_bin_1d(x, lo, dx, nbins):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _linear_bin_1d_numba(x, lo, dx, nbins)
    return _linear_bin_1d_numpy(x, lo, dx, nbins)


def _linear_bin_2d_numpy(xy, lo0, dx0, n0, lo1, dx1, n1):
    p0 = (xy[:, 0] - lo0) / dx0
    p1 = (xy[:, 1] - lo1) / dx1
    i0 = np.floor(p0).astype(np.int64)
    j0 = np.floor(p1).astype(np.int64)
    f0 = p0 - i0
    f1 = p1 - j0
    w = np.zeros(n0 * n1, dtype=np.float64)
    for di, dj, wt in (
        (0, 0, (1.0 - f0) * (1.0 - f1)),
        (0, 1, (1.0 - f0) * f1),
        (1, 0, f0 * (1.0 - f1)),
        (1, 1, f0 * f1),
    ):
        ii = i0 + di
        jj = j0 + dj
        keep = (ii >= 0) & (ii < n0) & (jj >= 0) & (jj < n1)
        np.add.at(w, (ii[keep] * n1 + jj[keep]), wt[keep])
    return w.reshape(n0, n1)


@njit(cache=True)
def _linear_bin_2d_numba(xy, lo0, dx0, n0, lo1, dx1, n1):  # pragma: no cover
    n = xy.shape[0]
    w = np.zeros((n0, n1), dtype=np.float64)
    i0 = np.empty(n, dtype=np.int64)
    j0 = np.empty(n, dtype=np.int64)
    f0 = np.empty(n, dtype=np.float64)
    f1 = np.empty(n, dtype=np.float64)
    for s in range(n):
        p0 = (xy[s, 0] - lo0) / dx0
        p1 = (xy[s, 1] - lo1) / dx1
        i = np.int64(np.floor(p0))
        j = np.int64(np.floor(p1))
        i0[s] = i
        j0[s] = j
        f0[s] = p0 - i
        f1[s] = p1 - j
    for di in range(2):
        for dj in range(2):
            for s in range(n):
                ii = i0[s] + di
                jj = j0[s] + dj
                if 0 <= ii < n0 and 0 <= jj < n1:
                    a = 1.0 - f0[s] if di == 0 else f0[s]
                    b = 1.0 - f1[s] if dj == 0 else f1[s]
                    w[ii, jj] += a * b
    return w


def linear_bin_2d(xy, lo0, dx0, n0, lo1, dx1, n1):
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    if USE_NUMBA:
        return _linear_bin_2d_numba(xy, lo0, dx0, n0, lo1, dx1, n1)
    return _linear_bin_2d_numpy(xy, lo0, dx0, n0, lo1, dx1, n1)
