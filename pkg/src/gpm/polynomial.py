"""Sparse multivariate polynomials with exact rational coefficients.

Variables are ``x1, x2, ...`` and the ambient measure is always the
standard Gaussian on R^n, so every moment functional here is exact:
``E[x_i^(2m)] = (2m - 1)!!`` per coordinate and monomials factor across
coordinates.  Coefficients are ``fractions.Fraction`` throughout; float
work (Monte Carlo, batch evaluation over sample clouds) goes through a
compiled array form handed to ``_kernels``.

The Hermite machinery uses probabilists' polynomials ``He_0 = 1``,
``He_1 = x``, ``He_{n+1} = x He_n - n He_{n-1}``, for which
``E[He_m He_n] = delta_{mn} n!``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, ParseError

# A monomial key is a tuple of (variable index, exponent) pairs, sorted by
# variable index, indices 1-based, exponents >= 1.  The empty tuple is the
# constant monomial.
MonomialKey = tuple

MAX_EXPONENT = 128
MAX_VAR_INDEX = 512

GENERATOR_ID = "philox4x64-numpy"


def as_fraction(c) -> Fraction:
    """Coerce ints, strings ('3/2', '2.5') and floats to Fraction.

    Floats convert by their exact binary value; parsing decimal text is
    the way to get exact decimal rationals.
    """
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, str)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    raise TypeError(f"cannot interpret {c!r} as a rational coefficient")


def _key_degree(key: MonomialKey) -> int:
    return sum(e for _, e in key)


def _canon_order(key: MonomialKey):
    # graded order: higher total degree first, then lex on (var, exp) pairs
    return (-_key_degree(key), key)


def _key_mul(a: MonomialKey, b: MonomialKey) -> MonomialKey:
    if not a:
        return b
    if not b:
        return a
    exps: dict[int, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


class Polynomial:
    """Immutable sparse polynomial over Fraction coefficients."""

    __slots__ = ("_terms", "_n_vars", "_degree", "_compiled", "_hash")

    def __init__(self, terms: Mapping[MonomialKey, object] | None = None, n_vars: int | None = None):
        clean: dict[MonomialKey, Fraction] = {}
        max_var = 0
        for key, coef in (terms or {}).items():
            key = tuple(sorted((int(v), int(e)) for v, e in key if e))
            frac = as_fraction(coef)
            if frac == 0:
                continue
            for v, e in key:
                if v < 1:
                    raise ValueError("variable indices are 1-based")
                if v > MAX_VAR_INDEX:
                    raise ValueError(f"variable index {v} exceeds limit {MAX_VAR_INDEX}")
                if e < 0:
                    raise ValueError("negative exponents are not polynomials")
                max_var = max(max_var, v)
            if key in clean:
                frac = clean[key] + frac
                if frac == 0:
                    del clean[key]
                    continue
            clean[key] = frac
        if n_vars is None:
            n_vars = max_var
        elif n_vars < max_var:
            raise ValueError(f"n_vars={n_vars} but a monomial uses x{max_var}")
        self._terms = clean
        self._n_vars = int(n_vars)
        self._degree = max((_key_degree(k) for k in clean), default=0)
        self._compiled = None
        self._hash = None

    # -- construction -------------------------------------------------

    @classmethod
    def zero(cls, n_vars: int = 0) -> "Polynomial":
        return cls({}, n_vars=n_vars)

    @classmethod
    def constant(cls, c, n_vars: int = 0) -> "Polynomial":
        return cls({(): as_fraction(c)}, n_vars=n_vars)

    @classmethod
    def variable(cls, i: int, n_vars: int | None = None) -> "Polynomial":
        return cls({((i, 1),): Fraction(1)}, n_vars=n_vars)

    # -- basic facts ---------------------------------------------------

    @property
    def terms(self) -> Mapping[MonomialKey, Fraction]:
        return MappingProxyType(self._terms)

    @property
    def n_vars(self) -> int:
        return self._n_vars

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def with_n_vars(self, n_vars: int) -> "Polynomial":
        return Polynomial(self._terms, n_vars=n_vars)

    def __eq__(self, other) -> bool:
        # mathematical equality; the declared n_vars padding is metadata
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        merged = dict(self._terms)
        for k, c in other._terms.items():
            s = merged.get(k, Fraction(0)) + c
            if s == 0:
                merged.pop(k, None)
            else:
                merged[k] = s
        return Polynomial(merged, n_vars=max(self._n_vars, other._n_vars))

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({k: -c for k, c in self._terms.items()}, n_vars=self._n_vars)

    def __sub__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = as_fraction(other)
            return Polynomial({k: v * c for k, v in self._terms.items()}, n_vars=self._n_vars)
        out: dict[MonomialKey, Fraction] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                k = _key_mul(k1, k2)
                s = out.get(k, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(k, None)
                else:
                    out[k] = s
        return Polynomial(out, n_vars=max(self._n_vars, other._n_vars))

    __rmul__ = __mul__

    def __pow__(self, m: int) -> "Polynomial":
        if not isinstance(m, int) or m < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        result = Polynomial.constant(1, n_vars=self._n_vars)
        base = self
        while m:
            if m & 1:
                result = result * base
            m >>= 1
            if m:
                base = base * base
        return result

    # -- calculus ------------------------------------------------------

    def partial_derivative(self, var: int) -> "Polynomial":
        if var < 1:
            raise ValueError("variable indices are 1-based")
        out: dict[MonomialKey, Fraction] = {}
        for key, coef in self._terms.items():
            for idx, (v, e) in enumerate(key):
                if v == var:
                    rest = key[:idx] + ((v, e - 1),) + key[idx + 1 :]
                    rest = tuple(p for p in rest if p[1] > 0)
                    s = out.get(rest, Fraction(0)) + coef * e
                    if s == 0:
                        out.pop(rest, None)
                    else:
                        out[rest] = s
                    break
        return Polynomial(out, n_vars=self._n_vars)

    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.partial_derivative(i) for i in range(1, self._n_vars + 1))

    # -- evaluation ----------------------------------------------------

    def evaluate(self, x: Sequence):
        """Exact evaluation at a point (Fractions in, Fraction out)."""
        if len(x) < self._n_vars:
            raise DimensionMismatch(
                f"point has {len(x)} coordinates, polynomial uses {self._n_vars}"
            )
        total = Fraction(0) if all(isinstance(v, (int, Fraction)) for v in x) else 0.0
        for key in sorted(self._terms, key=_canon_order):
            term = self._terms[key]
            for v, e in key:
                term = term * x[v - 1] ** e
            total = total + term
        return total

    def _compile(self):
        if self._compiled is None:
            keys = sorted(self._terms, key=_canon_order)
            coefs = np.array([float(self._terms[k]) for k in keys], dtype=np.float64)
            starts = np.zeros(len(keys) + 1, dtype=np.int64)
            var_idx: list[int] = []
            powers: list[int] = []
            for j, key in enumerate(keys):
                for v, e in key:
                    var_idx.append(v - 1)
                    powers.append(e)
                starts[j + 1] = len(var_idx)
            self._compiled = (
                coefs,
                starts,
                np.array(var_idx, dtype=np.int64),
                np.array(powers, dtype=np.int64),
            )
        return self._compiled

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] < self._n_vars:
            raise DimensionMismatch(
                f"points have {points.shape[1]} coordinates, polynomial uses {self._n_vars}"
            )
        if not self._terms:
            return np.zeros(points.shape[0])
        coefs, starts, var_idx, powers = self._compile()
        return _kernels.poly_eval_batch(points, coefs, starts, var_idx, powers)

    # -- text and JSON forms -------------------------------------------

    def to_string(self) -> str:
        if not self._terms:
            return "0"
        parts: list[str] = []
        for key in sorted(self._terms, key=_canon_order):
            coef = self._terms[key]
            mono = "*".join(f"x{v}^{e}" if e > 1 else f"x{v}" for v, e in key)
            neg = coef < 0
            mag = -coef if neg else coef
            if not mono:
                body = _format_fraction(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{_format_fraction(mag)}*{mono}"
            if not parts:
                parts.append(f"-{body}" if neg else body)
            else:
                parts.append(f"- {body}" if neg else f"+ {body}")
        return " ".join(parts)

    __str__ = to_string

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()!r}, n_vars={self._n_vars})"

    def to_json_dict(self) -> dict:
        terms = [
            {
                "exps": {str(v): e for v, e in key},
                "coef": _format_fraction(self._terms[key]),
            }
            for key in sorted(self._terms, key=_canon_order)
        ]
        return {"n_vars": self._n_vars, "terms": terms}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Polynomial":
        try:
            n_vars = int(data["n_vars"])
            terms: dict[MonomialKey, Fraction] = {}
            for entry in data["terms"]:
                key = tuple(sorted((int(v), int(e)) for v, e in entry["exps"].items()))
                coef = Fraction(str(entry["coef"]))
                terms[key] = terms.get(key, Fraction(0)) + coef
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed polynomial JSON: {exc}") from exc
        return cls(terms, n_vars=n_vars)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        return cls.from_json_dict(json.loads(text))


def _format_fraction(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                if j == n or not text[j].isdigit():
                    raise ParseError("malformed decimal", text, i)
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch == "x":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ParseError("expected variable index after 'x'", text, i)
            tokens.append(("var", text[i + 1 : j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", text, i)
    return tokens


def parse(text: str) -> Polynomial:
    """Parse sums/differences of '*'-joined factors into a Polynomial.

    Factors are rational or decimal numbers, ``x<i>`` or ``x<i>^<m>``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty polynomial expression", text, 0)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None, len(text))

    def take(kind):
        nonlocal pos
        tok = peek()
        if tok[0] != kind:
            raise ParseError(f"expected {kind}", text, tok[2])
        pos += 1
        return tok

    def parse_number() -> Fraction:
        tok = take("num")
        if peek()[0] == "/":
            if "." in tok[1]:
                raise ParseError("decimal numerator in rational", text, tok[2])
            take("/")
            den = take("num")
            if "." in den[1]:
                raise ParseError("decimal denominator in rational", text, den[2])
            if int(den[1]) == 0:
                raise ParseError("zero denominator", text, den[2])
            return Fraction(int(tok[1]), int(den[1]))
        return Fraction(tok[1])

    def parse_factor():
        tok = peek()
        if tok[0] == "num":
            return parse_number(), ()
        if tok[0] == "var":
            take("var")
            idx = int(tok[1])
            if idx < 1:
                raise ParseError("variable index must be >= 1 (x0 is not a variable)", text, tok[2])
            if idx > MAX_VAR_INDEX:
                raise ParseError(f"variable index exceeds limit {MAX_VAR_INDEX}", text, tok[2])
            exp = 1
            if peek()[0] == "^":
                take("^")
                etok = take("num")
                if "." in etok[1] or "/" == peek()[0]:
                    raise ParseError("exponent must be a plain integer", text, etok[2])
                exp = int(etok[1])
                if exp > MAX_EXPONENT:
                    raise ParseError(f"exponent overflow (limit {MAX_EXPONENT})", text, etok[2])
            return Fraction(1), ((idx, exp),) if exp else ()
        raise ParseError("expected a number or variable", text, tok[2])

    def parse_term():
        coef, key = parse_factor()
        while peek()[0] == "*":
            take("*")
            c2, k2 = parse_factor()
            coef *= c2
            key = _key_mul(key, k2)
            if any(e > MAX_EXPONENT for _, e in key):
                raise ParseError(f"exponent overflow (limit {MAX_EXPONENT})", text, peek()[2])
        return coef, key

    terms: dict[MonomialKey, Fraction] = {}
    sign = 1
    if peek()[0] in ("+", "-"):
        sign = -1 if take(peek()[0])[0] == "-" else 1
    while True:
        coef, key = parse_term()
        coef *= sign
        s = terms.get(key, Fraction(0)) + coef
        if s == 0:
            terms.pop(key, None)
        else:
            terms[key] = s
        tok = peek()
        if tok[0] is None:
            break
        if tok[0] not in ("+", "-"):
            raise ParseError("expected '+', '-' or end of input", text, tok[2])
        sign = -1 if take(tok[0])[0] == "-" else 1
    return Polynomial(terms)


# ---------------------------------------------------------------------------
# Gaussian moment functionals (exact)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gaussian_moment_1d(e: int) -> int:
    """E[x^e] for x ~ N(0,1): 0 for odd e, (e-1)!! for even e."""
    if e % 2:
        return 0
    m = e // 2
    return math.factorial(e) // (2**m * math.factorial(m))


def gaussian_moment(p: Polynomial) -> Fraction:
    total = Fraction(0)
    for key, coef in p.terms.items():
        m = 1
        for _, e in key:
            m *= _gaussian_moment_1d(e)
            if m == 0:
                break
        if m:
            total += coef * m
    return total


def gaussian_inner(p: Polynomial, q: Polynomial) -> Fraction:
    """E[p(X) q(X)]; operands may declare different n_vars."""
    return gaussian_moment(p * q)


def variance(p: Polynomial) -> Fraction:
    mean = gaussian_moment(p)
    return gaussian_moment(p * p) - mean * mean


def l2_norm(p: Polynomial) -> float:
    return math.sqrt(gaussian_moment(p * p))


def ou_apply(p: Polynomial) -> Polynomial:
    """Ornstein-Uhlenbeck generator: Lp = Laplacian(p) - <x, grad p>."""
    out = Polynomial.zero(p.n_vars)
    for i in range(1, p.n_vars + 1):
        di = p.partial_derivative(i)
        out = out + di.partial_derivative(i) - Polynomial.variable(i, p.n_vars) * di
    return out


def lp_norm_mc(p: Polynomial, order: float, n_samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo (E|p|^order)^(1/order) with a delta-method standard error."""
    if order <= 0:
        raise ValueError("order must be positive")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    gen = np.random.Generator(np.random.Philox(key=seed))
    pts = gen.standard_normal((n_samples, max(p.n_vars, 1)))
    vals = np.abs(p.eval_batch(pts)) ** order
    m = float(vals.mean())
    if m == 0.0:
        return 0.0, 0.0
    se_m = float(vals.std(ddof=1)) / math.sqrt(n_samples)
    est = m ** (1.0 / order)
    return est, se_m / order * m ** (1.0 / order - 1.0)


# ---------------------------------------------------------------------------
# Hermite / Wiener chaos
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _he_coeffs(n: int) -> tuple:
    """Monomial coefficients (low to high) of probabilists' He_n, exact ints."""
    if n == 0:
        return (1,)
    if n == 1:
        return (0, 1)
    prev2 = _he_coeffs(n - 2)
    prev1 = _he_coeffs(n - 1)
    out = [0] * (n + 1)
    for j, c in enumerate(prev1):
        out[j + 1] += c
    for j, c in enumerate(prev2):
        out[j] -= (n - 1) * c
    return tuple(out)


def hermite_polynomial(n: int, var: int = 1) -> Polynomial:
    if n < 0:
        raise ValueError("Hermite order must be nonnegative")
    coeffs = _he_coeffs(n)
    terms = {}
    for j, c in enumerate(coeffs):
        if c:
            terms[((var, j),) if j else ()] = Fraction(c)
    return Polynomial(terms)


def _hermite_mulx(hterms: dict, var: int) -> dict:
    """Multiply a Hermite-basis expansion by x_var: x He_j = He_{j+1} + j He_{j-1}."""
    out: dict[MonomialKey, Fraction] = {}

    def add(key, c):
        s = out.get(key, Fraction(0)) + c
        if s == 0:
            out.pop(key, None)
        else:
            out[key] = s

    for hkey, c in hterms.items():
        exps = dict(hkey)
        j = exps.get(var, 0)
        up = dict(exps)
        up[var] = j + 1
        add(tuple(sorted(up.items())), c)
        if j >= 1:
            down = dict(exps)
            if j == 1:
                del down[var]
            else:
                down[var] = j - 1
            add(tuple(sorted(down.items())), c * j)
    return out


@dataclass(frozen=True)
class ChaosDecomposition:
    """Orthogonal split of a polynomial by Wiener chaos order.

    ``components[k]`` is the projection onto chaos order k, back in the
    monomial basis; ``hermite_terms`` maps Hermite multi-indices (same
    sparse key shape as monomials) to coefficients.
    """

    source: Polynomial
    components: tuple
    hermite_terms: Mapping

    @property
    def order(self) -> int:
        return len(self.components) - 1

    def component(self, k: int) -> Polynomial:
        if 0 <= k < len(self.components):
            return self.components[k]
        return Polynomial.zero(self.source.n_vars)


def hermite_decompose(p: Polynomial) -> ChaosDecomposition:
    hterms: dict[MonomialKey, Fraction] = {}
    for key, coef in p.terms.items():
        rep = {(): coef}
        for v, e in key:
            for _ in range(e):
                rep = _hermite_mulx(rep, v)
        for hkey, c in rep.items():
            s = hterms.get(hkey, Fraction(0)) + c
            if s == 0:
                hterms.pop(hkey, None)
            else:
                hterms[hkey] = s
    comps: list[Polynomial] = [Polynomial.zero(p.n_vars) for _ in range(p.degree + 1)]
    for hkey in sorted(hterms, key=_canon_order):
        c = hterms[hkey]
        k = _key_degree(hkey)
        prod = Polynomial.constant(c, n_vars=p.n_vars)
        for v, j in hkey:
            prod = prod * hermite_polynomial(j, var=v)
        comps[k] = comps[k] + prod
    return ChaosDecomposition(
        source=p,
        components=tuple(comps),
        hermite_terms=MappingProxyType(dict(hterms)),
    )


# ---------------------------------------------------------------------------
# polynomial maps R^n -> R^k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialMap:
    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ValueError("a map needs at least one component")
        n = max(c.n_vars for c in self.components)
        object.__setattr__(
            self, "components", tuple(c.with_n_vars(n) for c in self.components)
        )

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def n_vars(self) -> int:
        return self.components[0].n_vars

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        return np.column_stack([c.eval_batch(points) for c in self.components])

    def to_json_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "components": [c.to_json_dict()["terms"] for c in self.components],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "PolynomialMap":
        if "components" in data:
            n_vars = int(data["n_vars"])
            comps = tuple(
                Polynomial.from_json_dict({"n_vars": n_vars, "terms": t})
                for t in data["components"]
            )
            return cls(comps)
        return cls((Polynomial.from_json_dict(data),))

    def __str__(self) -> str:
        return ", ".join(c.to_string() for c in self.components)


def parse_map(text: str) -> PolynomialMap:
    parts = [s for s in text.split(",")]
    if not parts or any(not s.strip() for s in parts):
        raise ParseError("expected comma-separated polynomial components", text, 0)
    return PolynomialMap(tuple(parse(s) for s in parts))
