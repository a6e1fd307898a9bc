"""Malliavin matrices of polynomial maps and the diagnostics built on them.

For f = (f_1 .. f_k) in variables x_1 .. x_n, the Malliavin matrix is the
Gram matrix of gradients m_ij = <grad f_i, grad f_j>, a symmetric k x k
matrix of polynomials of degree at most 2(d-1); its determinant Delta_f is
nonnegative everywhere and controls absolute continuity and small-ball
behavior of the image law.

Everything symbolic here is exact (Fraction coefficients); pointwise
evaluation clamps tiny negative determinants produced by floating-point
LU, since the true value cannot be negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import GpmError
from .polynomial import (
    Polynomial,
    PolynomialMap,
    gaussian_inner,
    gaussian_moment,
    l2_norm,
    variance,
)
from .sampling import sample_gaussian

#: relative tolerance for clamping floating-point Gram determinants
DET_CLAMP_REL = 1e-10


def _as_map(f) -> PolynomialMap:
    if isinstance(f, Polynomial):
        return PolynomialMap((f,))
    if isinstance(f, PolynomialMap):
        return f
    raise GpmError(f"expected a polynomial or polynomial map, got {type(f).__name__}")


@dataclass(frozen=True)
class MalliavinMatrixPoly:
    """Exact symbolic Gram matrix of the gradients of a polynomial map."""

    source: PolynomialMap
    entries: tuple

    @property
    def k(self) -> int:
        return len(self.entries)

    def entry(self, i: int, j: int) -> Polynomial:
        return self.entries[i][j]

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate to an (n, k, k) array of matrices."""
        points = np.asarray(points, dtype=np.float64)
        n = points.shape[0]
        out = np.empty((n, self.k, self.k))
        for i in range(self.k):
            for j in range(i, self.k):
                vals = self.entries[i][j].eval_batch(points)
                out[:, i, j] = vals
                out[:, j, i] = vals
        return out

    def __str__(self) -> str:
        rows = []
        for row in self.entries:
            rows.append("[" + ", ".join(str(p) for p in row) + "]")
        return "[" + ", ".join(rows) + "]"


def malliavin_matrix(f) -> MalliavinMatrixPoly:
    """m_ij = <grad f_i, grad f_j>, exactly; m_ij and m_ji are one object."""
    fmap = _as_map(f)
    grads = [c.gradient() for c in fmap.components]
    k = fmap.k
    rows = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            acc = Polynomial.zero(fmap.n_vars)
            for gi, gj in zip(grads[i], grads[j]):
                acc = acc + gi * gj
            rows[i][j] = acc
            rows[j][i] = acc
    return MalliavinMatrixPoly(source=fmap, entries=tuple(tuple(r) for r in rows))


def _det_poly(entries, rows, cols) -> Polynomial:
    if len(rows) == 1:
        return entries[rows[0]][cols[0]]
    acc = None
    for pos, c in enumerate(cols):
        minor = _det_poly(entries, rows[1:], cols[:pos] + cols[pos + 1 :])
        term = entries[rows[0]][c] * minor
        if pos % 2 == 1:
            term = term * Polynomial.constant(-1, term.n_vars)
        acc = term if acc is None else acc + term
    return acc


def _det_scale(mats: np.ndarray) -> np.ndarray:
    k = mats.shape[-1]
    hs = np.sqrt(np.sum(mats * mats, axis=(-2, -1)))
    return np.maximum(1.0, (hs / math.sqrt(k)) ** k)


def malliavin_det(f, points=None):
    """det of the Malliavin matrix: symbolic (k <= 3) or at given points.

    With ``points`` (an (n, n_vars) array) returns an (n,) array computed by
    LU factorization; values in [-1e-10 * scale, 0) are clamped to 0 and
    anything more negative raises, since a Gram determinant is nonnegative.
    """
    fmap = _as_map(f)
    mat = malliavin_matrix(fmap)
    if points is None:
        if fmap.k > 3:
            raise GpmError(
                f"symbolic determinant limited to k <= 3 (got k = {fmap.k}); "
                "evaluate pointwise via points="
            )
        idx = tuple(range(fmap.k))
        return _det_poly(mat.entries, idx, idx)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    mats = mat.eval_batch(points)
    dets = np.linalg.det(mats)
    scale = _det_scale(mats)
    too_negative = dets < -DET_CLAMP_REL * scale
    if np.any(too_negative):
        worst = float(dets[too_negative].min())
        raise GpmError(f"Gram determinant negative beyond tolerance: {worst:.3e}")
    return np.maximum(dets, 0.0)


def _adjugate(m: np.ndarray) -> np.ndarray:
    k = m.shape[0]
    if k == 1:
        return np.ones((1, 1))
    adj = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            minor = np.delete(np.delete(m, j, axis=0), i, axis=1)
            adj[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


@dataclass(frozen=True)
class MalliavinEval:
    """Malliavin matrix, determinant and adjugate at one point."""

    point: np.ndarray
    matrix: np.ndarray
    det: float
    adjugate: np.ndarray

    def residual(self) -> float:
        """max-norm defect of M . adj = det . I."""
        k = self.matrix.shape[0]
        return float(np.max(np.abs(self.matrix @ self.adjugate - self.det * np.eye(k))))


def malliavin_eval(f, x) -> MalliavinEval:
    fmap = _as_map(f)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    mat = malliavin_matrix(fmap).eval_batch(x)[0]
    det = float(np.linalg.det(mat))
    scale = float(_det_scale(mat[None, :, :])[0])
    if det < -DET_CLAMP_REL * scale:
        raise GpmError(f"Gram determinant negative beyond tolerance: {det:.3e}")
    return MalliavinEval(
        point=x[0], matrix=mat, det=max(det, 0.0), adjugate=_adjugate(mat)
    )


def expected_det(f, mode: str = "exact", n_samples: int = 200_000, seed: int = 0):
    """E[Delta_f] under the standard Gaussian.

    ``exact`` integrates the symbolic determinant term by term (k <= 3) and
    returns a float; ``mc`` returns (estimate, standard_error).
    """
    fmap = _as_map(f)
    if mode == "exact":
        sym = malliavin_det(fmap)
        return float(gaussian_moment(sym))
    if mode == "mc":
        pts = sample_gaussian(fmap.n_vars, n_samples, seed).points
        dets = malliavin_det(fmap, points=pts)
        est = float(dets.mean())
        se = float(dets.std(ddof=1) / math.sqrt(n_samples))
        return est, se
    raise ValueError("mode must be 'exact' or 'mc'")


def grad_star_norm(p: Polynomial) -> float:
    """sup over unit directions e of (E (d_e p)^2)^(1/2).

    Equals the square root of the top eigenvalue of C_ij = E[d_i p d_j p].
    """
    if not isinstance(p, Polynomial):
        raise GpmError("grad_star_norm takes a single polynomial")
    if p.degree <= 0:
        return 0.0
    grads = p.gradient()
    n = len(grads)
    c = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = float(gaussian_inner(grads[i], grads[j]))
            c[i, j] = v
            c[j, i] = v
    top = float(np.linalg.eigvalsh(c)[-1])
    return math.sqrt(max(top, 0.0))


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


def _pure_power_degree(p: Polynomial):
    """d if p is exactly one variable raised to d with coefficient 1."""
    terms = p.terms
    if len(terms) != 1:
        return None
    ((key, coef),) = terms.items()
    if coef != 1 or len(key) != 1:
        return None
    return int(key[0][1])


def _ndtr(x):
    from scipy.special import ndtr

    return ndtr(x)


def _gauss_abs_moment(d: int) -> float:
    # E|x|^d = 2^(d/2) Gamma((d+1)/2) / sqrt(pi)
    return 2.0 ** (d / 2.0) * math.gamma((d + 1) / 2.0) / math.sqrt(math.pi)


def carbery_wright_profile(
    p: Polynomial, t_grid=None, n_samples: int = 1_000_000, seed: int = 0
) -> dict:
    """Small-ball ratios r(t) = P(|p| <= t) (E|p|)^(1/d) / (d t^(1/d)).

    The distribution-free bound says r stays below an absolute constant.
    For a pure power x^d everything is closed-form (no MC); otherwise both
    the small-ball probability and E|p| are seeded MC estimates and their
    standard errors are returned.
    """
    d = p.degree
    if d < 1:
        raise GpmError("carbery_wright_profile needs a non-constant polynomial")
    pure = _pure_power_degree(p)
    if t_grid is None:
        t_grid = np.geomspace(1e-8, 1.0, 33) if pure else np.geomspace(1e-2, 2.0, 25)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if pure is not None:
        prob = 2.0 * _ndtr(t_grid ** (1.0 / pure)) - 1.0
        abs_moment = _gauss_abs_moment(pure)
        prob_se = np.zeros_like(prob)
        exact = True
    else:
        pts = sample_gaussian(p.n_vars, n_samples, seed).points
        vals = np.abs(p.eval_batch(pts))
        prob = np.array([np.mean(vals <= t) for t in t_grid])
        prob_se = np.sqrt(np.maximum(prob * (1 - prob), 0.0) / n_samples)
        abs_moment = float(vals.mean())
        exact = False
    ratios = prob * abs_moment ** (1.0 / d) / (d * t_grid ** (1.0 / d))
    return {
        "t": t_grid,
        "prob": prob,
        "prob_se": prob_se,
        "abs_moment": abs_moment,
        "ratios": ratios,
        "sup_ratio": float(ratios.max()),
        "degree": d,
        "exact": exact,
    }


def small_ball_profile(
    f, s_grid, n_samples: int = 200_000, seed: int = 0, c: float = 1.0
) -> dict:
    """MC profile of P(Delta_f <= s) with the power-law bound check.

    The bound 2 c k (d-1) (E Delta)^(-beta) s^beta with
    beta = 1 / (2 k (d-1)) applies for d >= 2; for affine maps (d = 1,
    constant determinant) only the raw profile is reported.
    """
    fmap = _as_map(f)
    s_grid = np.asarray(s_grid, dtype=np.float64)
    pts = sample_gaussian(fmap.n_vars, n_samples, seed).points
    dets = malliavin_det(fmap, points=pts)
    prob = np.array([np.mean(dets <= s) for s in s_grid])
    mean_det = float(dets.mean())
    out = {
        "s": s_grid,
        "prob": prob,
        "mean_det": mean_det,
        "k": fmap.k,
        "degree": fmap.degree,
    }
    d = fmap.degree
    if d >= 2:
        beta = 1.0 / (2.0 * fmap.k * (d - 1))
        bound = 2.0 * c * fmap.k * (d - 1) * mean_det ** (-beta) * s_grid**beta
        out["beta"] = beta
        out["bound"] = bound
        out["bound_holds"] = bool(np.all(prob <= bound + 1e-12))
    return out


def det_perturbation_bound(a, b) -> dict:
    """|det A - det B| against ||A-B||_HS (||A||_HS^2 + ||B||_HS^2)^((k-1)/2).

    Accepts a single pair of k x k matrices or stacked (n, k, k) batches.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.shape[-1] != a.shape[-2]:
        raise GpmError("matrices must share a square shape")
    k = a.shape[-1]
    lhs = np.abs(np.linalg.det(a) - np.linalg.det(b))
    diff_hs = np.sqrt(np.sum((a - b) ** 2, axis=(-2, -1)))
    sq = np.sum(a * a, axis=(-2, -1)) + np.sum(b * b, axis=(-2, -1))
    rhs = diff_hs * sq ** ((k - 1) / 2.0)
    scale = np.maximum(1.0, rhs)
    holds = lhs <= rhs + 1e-12 * scale
    if a.ndim == 2:
        return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(holds)}
    return {"lhs": lhs, "rhs": rhs, "holds": bool(np.all(holds))}


def reverse_poincare_check(p: Polynomial) -> dict:
    """E|grad p|^2 <= d Var(p), evaluated in exact arithmetic.

    Equality holds exactly when p sits in a single chaos level of order d.
    """
    d = max(p.degree, 0)
    lhs = sum((gaussian_inner(g, g) for g in p.gradient()), start=Fraction(0))
    rhs = d * variance(p)
    return {
        "lhs": float(lhs),
        "rhs": float(rhs),
        "degree": d,
        "holds": lhs <= rhs,
        "equality": lhs == rhs,
    }


def gaussian_tail_check(
    p: Polynomial, r: float, t_grid=None, n_samples: int = 500_000, seed: int = 0
) -> dict:
    """Exceedance of |p| >= t ||p||_2 with the fitted tail prefactor.

    For r below d/(2e) the tail bound exp(-r t^(2/d)) holds with some
    finite prefactor c_r; we report the empirical
    c_hat = sup_t P(|p| >= t ||p||_2) exp(r t^(2/d)), never asserting a
    universal value.
    """
    d = p.degree
    if d < 1:
        raise GpmError("gaussian_tail_check needs a non-constant polynomial")
    r_max = d / (2.0 * math.e)
    if not 0 < r < r_max:
        raise ValueError(f"r must lie in (0, {r_max:.6f}) for degree {d}")
    if t_grid is None:
        t_grid = np.linspace(0.0, 5.0, 26)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    norm = l2_norm(p)
    pts = sample_gaussian(p.n_vars, n_samples, seed).points
    vals = np.abs(p.eval_batch(pts))
    exceedance = np.array([np.mean(vals >= t * norm) for t in t_grid])
    weights = np.exp(r * t_grid ** (2.0 / d))
    profile = exceedance * weights
    return {
        "t": t_grid,
        "exceedance": exceedance,
        "c_r_profile": profile,
        "c_r_hat": float(profile.max()),
        "r": r,
        "l2_norm": norm,
    }
