"""Measure representations: closed-form laws, grid densities, sample sets.

Closed-form laws are 1D families (plus independent products of them for
k >= 2).  The workhorse family is ``MonomialPower(d, h)``, the law of
``x^d - h`` under the standard Gaussian; its CDF is explicit:

* even d (or the folded convention ``|x|^d - h``):
  ``F(t) = 2 Phi((t+h)^(1/d)) - 1`` for ``t >= -h``, else 0;
* odd d, signed convention: ``F(t) = Phi(sgn(t+h) |t+h|^(1/d))``.

Shifting the law by ``delta`` only moves the offset, which is what makes
the translate families exactly tractable.  All sampling is counter-based
(numpy Philox) so a (seed, generator_id, count) triple regenerates the
same points bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import _kernels
from .errors import DegenerateSampleError, DimensionMismatch, GpmError, TruncationError
from .polynomial import Polynomial, PolynomialMap

GENERATOR_ID = "philox4x64-numpy"

#: mass allowed outside a law's reported support window
SUPPORT_TAIL = 1e-13

_GAUSS_TAIL_RADIUS = 8.5  # Phi(-8.5) ~ 9.5e-18
_POWER_TAIL_RADIUS = 8.0


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# sample sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Points of an empirical measure plus the recipe that generated them."""

    points: np.ndarray
    seed: int | None = None
    generator_id: str = GENERATOR_ID

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2:
            raise DimensionMismatch("sample points must form an (n, dim) array")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i}" for i in range(1, self.dim + 1)])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise GpmError(f"empty sample CSV: {path}")
        start = 1 if rows[0] and not _is_float(rows[0][0]) else 0
        data = np.array([[float(v) for v in row] for row in rows[start:] if row])
        return cls(points=data, seed=None, generator_id="file")


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def sample_gaussian(n_vars: int, n_samples: int, seed: int) -> SampleSet:
    """n_samples iid standard Gaussian points in R^n_vars (Philox stream)."""
    if n_vars < 1 or n_samples < 1:
        raise ValueError("n_vars and n_samples must be positive")
    pts = _rng(seed).standard_normal((n_samples, n_vars))
    return SampleSet(points=pts, seed=seed)


def pushforward(f: Polynomial | PolynomialMap, s: SampleSet) -> SampleSet:
    """Image of the sample under a polynomial map, keeping the seed recipe."""
    if isinstance(f, Polynomial):
        f = PolynomialMap((f,))
    if s.dim < f.n_vars:
        raise DimensionMismatch(
            f"samples have dim {s.dim}, map needs {f.n_vars} inputs"
        )
    return SampleSet(points=f.eval_batch(s.points), seed=s.seed, generator_id=s.generator_id)


# ---------------------------------------------------------------------------
# grid densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density values on a uniform tensor grid (1D or 2D), trapezoid mass."""

    axes: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(n)) for lo, hi, n in self.axes)
        vals = np.asarray(self.values, dtype=np.float64)
        if len(axes) not in (1, 2):
            raise DimensionMismatch("grid densities support dim 1 and 2")
        shape = tuple(n for _, _, n in axes)
        if vals.shape != shape:
            raise DimensionMismatch(f"values shape {vals.shape} != grid shape {shape}")
        for lo, hi, n in axes:
            if not (hi > lo and n >= 8):
                raise ValueError("each axis needs hi > lo and n >= 8")
        if vals.min() < -1e-12 * max(vals.max(), 1.0):
            raise ValueError("density values must be nonnegative")
        vals = np.clip(vals, 0.0, None)
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.axes)

    def coords(self, axis: int = 0) -> np.ndarray:
        lo, hi, n = self.axes[axis]
        return np.linspace(lo, hi, n)

    def spacing(self, axis: int = 0) -> float:
        lo, hi, n = self.axes[axis]
        return (hi - lo) / (n - 1)

    def _trapz_weights(self, axis: int) -> np.ndarray:
        _, _, n = self.axes[axis]
        w = np.full(n, self.spacing(axis))
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def mass(self) -> float:
        if self.dim == 1:
            return float(self._trapz_weights(0) @ self.values)
        w0 = self._trapz_weights(0)
        w1 = self._trapz_weights(1)
        return float(w0 @ self.values @ w1)

    def normalized(self) -> "GridDensity":
        m = self.mass()
        if m <= 0:
            raise GpmError("cannot normalize a grid with zero mass")
        meta = dict(self.meta)
        meta["raw_mass"] = m
        return GridDensity(self.axes, self.values / m, meta)

    def boundary_mass(self) -> float:
        """Mass sitting in the outermost grid cells (truncation indicator)."""
        if self.dim == 1:
            dx = self.spacing(0)
            v = self.values
            return float(0.5 * dx * (v[0] + v[1] + v[-2] + v[-1]))
        dx0, dx1 = self.spacing(0), self.spacing(1)
        v = self.values
        ring = v[0, :].sum() + v[-1, :].sum() + v[:, 0].sum() + v[:, -1].sum()
        return float(ring * dx0 * dx1)

    def cdf_values(self) -> np.ndarray:
        """1D cumulative mass at each node (trapezoid)."""
        if self.dim != 1:
            raise DimensionMismatch("cdf_values is 1D only")
        v = self.values
        dx = self.spacing(0)
        inc = 0.5 * dx * (v[1:] + v[:-1])
        return np.concatenate([[0.0], np.cumsum(inc)])

    def to_json_dict(self) -> dict:
        return {
            "axes": [{"lo": lo, "hi": hi, "n": n} for lo, hi, n in self.axes],
            "values": [float(v) for v in self.values.ravel()],
        }

    @classmethod
    def from_json_dict(cls, data) -> "GridDensity":
        axes = tuple((a["lo"], a["hi"], int(a["n"])) for a in data["axes"])
        shape = tuple(n for _, _, n in axes)
        vals = np.array(data["values"], dtype=np.float64).reshape(shape)
        return cls(axes, vals)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json(cls, path) -> "GridDensity":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# closed-form laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian1D:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")

    dim = 1

    def density(self, t):
        t = np.asarray(t, dtype=np.float64)
        return _norm_pdf((t - self.mean) / self.sd) / self.sd

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        return ndtr((t - self.mean) / self.sd)

    def shifted(self, delta: float) -> "Gaussian1D":
        return Gaussian1D(self.mean + delta, self.sd)

    def support(self):
        r = _GAUSS_TAIL_RADIUS * self.sd
        return (self.mean - r, self.mean + r)

    def singular_points(self):
        return ()

    def from_std_normal(self, z):
        return self.mean + self.sd * z


@dataclass(frozen=True)
class MonomialPower:
    """Law of x^degree - offset (or |x|^degree - offset when folded)."""

    degree: int
    offset: float = 0.0
    convention: str = "signed"

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.convention not in ("signed", "folded"):
            raise ValueError("convention must be 'signed' or 'folded'")

    dim = 1

    @property
    def one_sided(self) -> bool:
        return self.degree % 2 == 0 or self.convention == "folded"

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        u = np.atleast_1d(t) + self.offset
        d = self.degree
        if self.one_sided:
            out = np.zeros_like(u)
            pos = u > 0
            out[pos] = 2.0 * ndtr(u[pos] ** (1.0 / d)) - 1.0
        else:
            out = ndtr(np.sign(u) * np.abs(u) ** (1.0 / d))
        return out if t.ndim else float(out[0])

    def density(self, t):
        t = np.asarray(t, dtype=np.float64)
        u = np.atleast_1d(t) + self.offset
        d = self.degree
        out = np.zeros_like(u)
        if self.one_sided:
            pos = u > 0
            r = u[pos] ** (1.0 / d)
            out[pos] = (2.0 / d) * r / u[pos] * _norm_pdf(r)
        elif d == 1:
            out = _norm_pdf(u)
        else:
            nz = u != 0
            r = np.abs(u[nz]) ** (1.0 / d)
            out[nz] = (1.0 / d) * r / np.abs(u[nz]) * _norm_pdf(r)
        if d >= 2:
            out[u == 0] = np.inf
        return out if t.ndim else float(out[0])

    def shifted(self, delta: float) -> "MonomialPower":
        return MonomialPower(self.degree, self.offset - delta, self.convention)

    def support(self):
        top = _POWER_TAIL_RADIUS**self.degree - self.offset
        if self.one_sided:
            return (-self.offset, top)
        return (-(_POWER_TAIL_RADIUS**self.degree) - self.offset, top)

    def singular_points(self):
        # the density blows up (d >= 2) or jumps (folded d = 1) at -offset
        if self.degree >= 2 or self.convention == "folded":
            return (-self.offset,)
        return ()

    def from_std_normal(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.one_sided:
            return np.abs(z) ** self.degree - self.offset
        return np.sign(z) * np.abs(z) ** self.degree - self.offset


def chisq1() -> MonomialPower:
    """The chi-square(1) law, i.e. x^2 with no offset."""
    return MonomialPower(2, 0.0)


@dataclass(frozen=True)
class ProductLaw:
    """Independent product of 1D closed-form laws (dimension = len(parts))."""

    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("ProductLaw needs at least two factors")

    @property
    def dim(self) -> int:
        return len(self.parts)

    def density(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.ones(points.shape[0])
        for i, law in enumerate(self.parts):
            out = out * law.density(points[:, i])
        return out

    def density_outer(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Density on a tensor grid as an outer product of 1D evaluations."""
        if len(coords) != self.dim:
            raise DimensionMismatch("one coordinate vector per factor required")
        out = self.parts[0].density(coords[0])
        for law, c in zip(self.parts[1:], coords[1:]):
            out = np.multiply.outer(out, law.density(c))
        return out

    def shifted(self, delta) -> "ProductLaw":
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape != (self.dim,):
            raise DimensionMismatch("shift vector dimension mismatch")
        return ProductLaw(tuple(law.shifted(float(d)) for law, d in zip(self.parts, delta)))

    def support(self):
        return tuple(law.support() for law in self.parts)

    def from_std_normal(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        cols = [law.from_std_normal(z[:, i]) for i, law in enumerate(self.parts)]
        return np.column_stack(cols)


ClosedFormLaw = (Gaussian1D, MonomialPower, ProductLaw)


def sample_law(law, n_samples: int, seed: int) -> SampleSet:
    """Draw from a closed-form law through its standard-normal transform."""
    dim = law.dim
    z = _rng(seed).standard_normal((n_samples, dim))
    pts = law.from_std_normal(z if dim > 1 else z[:, 0])
    if pts.ndim == 1:
        pts = pts[:, None]
    return SampleSet(points=pts, seed=seed)


# ---------------------------------------------------------------------------
# kernel density estimation (binned, Gaussian kernel, Silverman bandwidth)
# ---------------------------------------------------------------------------


def silverman_bandwidth(data: np.ndarray, dim_total: int = 1) -> float:
    """1.06 sigma n^(-1/5) in 1D; sigma n^(-1/6) per axis in 2D."""
    sd = float(np.std(data, ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise DegenerateSampleError("sample has zero variance; bandwidth undefined")
    n = data.shape[0]
    if dim_total == 1:
        return 1.06 * sd * n ** (-1.0 / 5.0)
    return sd * n ** (-1.0 / (dim_total + 4.0))


def kde_density(
    samples: SampleSet,
    grid=None,
    bandwidth=None,
    n_points: int | None = None,
    renormalize: bool = True,
) -> GridDensity:
    """Gaussian-kernel density of a sample on a uniform grid.

    Linear binning onto the grid followed by discrete convolution with the
    sampled kernel; the O(n) binning is the hot loop and lives in _kernels.
    ``grid`` may fix (lo, hi, n) per axis; by default the window covers the
    sample with a 4-bandwidth margin.
    """
    if samples.n < 8:
        raise GpmError("KDE needs at least 8 samples")
    if samples.dim == 1:
        return _kde_1d(samples, grid, bandwidth, n_points or 4096, renormalize)
    if samples.dim == 2:
        return _kde_2d(samples, grid, bandwidth, n_points or 256, renormalize)
    raise DimensionMismatch("kde_density supports dim 1 and 2")


def _kde_1d(samples, grid, bandwidth, n_points, renormalize):
    x = samples.points[:, 0]
    bw = float(bandwidth) if bandwidth else silverman_bandwidth(x, 1)
    if grid is None:
        lo = float(x.min()) - 4.0 * bw
        hi = float(x.max()) + 4.0 * bw
        n = n_points
    else:
        (lo, hi, n) = grid if len(grid) == 3 else (*grid, n_points)
    dx = (hi - lo) / (n - 1)
    w = _kernels.linear_bin_1d(x, lo, dx, n)
    m = int(math.ceil(6.0 * bw / dx))
    ker = _norm_pdf(np.arange(-m, m + 1) * dx / bw) / bw
    dens = np.convolve(w, ker, mode="same") / samples.n
    gd = GridDensity(((lo, hi, n),), dens, {"bandwidth": bw, "n_samples": samples.n})
    return gd.normalized() if renormalize else gd


def _kde_2d(samples, grid, bandwidth, n_points, renormalize):
    from scipy import ndimage

    pts = samples.points
    if bandwidth is None:
        bws = [silverman_bandwidth(pts[:, i], 2) for i in range(2)]
    elif np.isscalar(bandwidth):
        bws = [float(bandwidth)] * 2
    else:
        bws = [float(b) for b in bandwidth]
    axes = []
    for i in range(2):
        if grid is None:
            lo = float(pts[:, i].min()) - 4.0 * bws[i]
            hi = float(pts[:, i].max()) + 4.0 * bws[i]
            n = n_points
        else:
            lo, hi, n = grid[i]
        axes.append((lo, hi, int(n)))
    (lo0, hi0, n0), (lo1, hi1, n1) = axes
    dx0 = (hi0 - lo0) / (n0 - 1)
    dx1 = (hi1 - lo1) / (n1 - 1)
    w = _kernels.linear_bin_2d(pts, lo0, dx0, n0, lo1, dx1, n1)
    dens = ndimage.gaussian_filter(
        w, sigma=(bws[0] / dx0, bws[1] / dx1), mode="constant", truncate=8.0
    )
    dens /= samples.n * dx0 * dx1
    gd = GridDensity(
        (axes[0], axes[1]), dens, {"bandwidth": tuple(bws), "n_samples": samples.n}
    )
    return gd.normalized() if renormalize else gd


# ---------------------------------------------------------------------------
# absolute moments
# ---------------------------------------------------------------------------


def abs_moment(obj, p: float) -> float:
    """E|X|^p for a 1D law, a grid density, or a sample set.

    Grid input raises TruncationError when the boundary cells carry more
    than 1e-4 mass, since the tail then dominates the estimate.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    if isinstance(obj, SampleSet):
        if obj.dim == 1:
            return float(np.mean(np.abs(obj.points[:, 0]) ** p))
        return float(np.mean(np.linalg.norm(obj.points, axis=1) ** p))
    if isinstance(obj, GridDensity):
        if obj.dim != 1:
            raise DimensionMismatch("grid moments implemented in 1D")
        if obj.boundary_mass() > 1e-4:
            raise TruncationError(
                f"boundary mass {obj.boundary_mass():.3g} > 1e-4; widen the grid"
            )
        x = obj.coords(0)
        return float(obj._trapz_weights(0) @ (np.abs(x) ** p * obj.values))
    if isinstance(obj, (Gaussian1D, MonomialPower)):
        lo, hi = obj.support()
        pts = [s for s in obj.singular_points() if lo < s < hi] + (
            [0.0] if lo < 0.0 < hi else []
        )
        val, err = integrate.quad(
            lambda t: np.abs(t) ** p * float(obj.density(np.array([t]))[0]),
            lo,
            hi,
            points=sorted(set(pts)) or None,
            limit=400,
            epsabs=1e-11,
            epsrel=1e-11,
        )
        return float(val)
    raise GpmError(f"abs_moment not available for {type(obj).__name__}")
