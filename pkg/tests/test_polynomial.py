"""Exact algebra tests: parsing, moments, Hermite chaos, OU calculus.

Oracles: scipy quadrature for 1D Gaussian moments, finite differences for
partial derivatives, and the classical double-factorial table.  Everything
asserted as exact below really is exact (Fraction arithmetic end to end).
"""
from __future__ import annotations

import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import gpm
from gpm.errors import DimensionMismatch, ParseError
from gpm.polynomial import (
    ChaosDecomposition,
    Polynomial,
    PolynomialMap,
    _gaussian_moment_1d,
    gaussian_inner,
    gaussian_moment,
    hermite_decompose,
    hermite_polynomial,
    l2_norm,
    lp_norm_mc,
    ou_apply,
    parse,
    parse_map,
    variance,
)

# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def quad_gaussian_moment_1d(e: int) -> float:
    """Independent 1D moment oracle: adaptive quadrature of x^e phi(x)."""
    val, err = integrate.quad(
        lambda x: x**e * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi),
        -40,
        40,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=400,
    )
    assert err < 1e-6 * max(1.0, abs(val))
    return val


def random_rational_poly(rng: random.Random, n_vars: int, degree: int, n_terms: int) -> Polynomial:
    terms = {}
    for _ in range(n_terms):
        exps = {}
        budget = rng.randint(0, degree)
        while budget > 0:
            v = rng.randint(1, n_vars)
            e = rng.randint(1, budget)
            exps[v] = exps.get(v, 0) + e
            budget -= e
        coef = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        key = tuple(sorted(exps.items()))
        terms[key] = terms.get(key, Fraction(0)) + coef
    return Polynomial(terms, n_vars=n_vars)


# ---------------------------------------------------------------------------
# parsing and printing
# ---------------------------------------------------------------------------


def test_parse_basic_forms():
    p = parse("3/2*x1^2*x2 - x3 + 2.5")
    assert p.n_vars == 3
    assert p.degree == 3
    assert p.terms[((1, 2), (2, 1))] == Fraction(3, 2)
    assert p.terms[((3, 1),)] == Fraction(-1)
    assert p.terms[()] == Fraction(5, 2)


def test_parse_merges_and_cancels():
    assert parse("x1 + x1") == parse("2*x1")
    assert parse("0*x1 + x1") == parse("x1")
    assert parse("x1 - x1").is_zero
    assert parse("x1*x1") == parse("x1^2")


def test_parse_leading_sign_and_implicit_one():
    p = parse("-x1 + x2")
    assert p.terms[((1, 1),)] == -1
    q = parse("+x1")
    assert q.terms[((1, 1),)] == 1


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "x0",
        "x",
        "x1 +",
        "x1 * * x2",
        "x1^",
        "x1^2.5",
        "2//3",
        "1/0",
        "x1^999",
        "y1",
        "x1 x2",
    ],
)
def test_parse_rejects(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as exc:
        parse("x1 + y2")
    assert exc.value.pos == 5


def test_print_parse_round_trip_known():
    for text in ["x1^2 - 1", "3/2*x1*x2 + x3^4 - 7/3", "0", "2.25", "-x1"]:
        p = parse(text) if text != "0" else Polynomial.zero()
        assert parse(p.to_string()) == p if not p.is_zero else p.to_string() == "0"


@st.composite
def poly_strategy(draw):
    n_terms = draw(st.integers(0, 6))
    terms = {}
    for _ in range(n_terms):
        nv = draw(st.integers(1, 3))
        exps = {}
        for _ in range(draw(st.integers(0, 3))):
            exps[draw(st.integers(1, nv))] = draw(st.integers(1, 4))
        key = tuple(sorted(exps.items()))
        coef = Fraction(draw(st.integers(-20, 20)), draw(st.integers(1, 12)))
        terms[key] = terms.get(key, Fraction(0)) + coef
    return Polynomial(terms)


@given(poly_strategy())
@settings(max_examples=150, deadline=None)
def test_print_parse_round_trip_property(p):
    if p.is_zero:
        assert p.to_string() == "0"
    else:
        assert parse(p.to_string()) == p


@given(poly_strategy(), poly_strategy())
@settings(max_examples=60, deadline=None)
def test_ring_laws(p, q):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) - q == p
    assert p * (q + q) == p * q + p * q


def test_json_round_trip():
    p = parse("3/2*x1^2 - x2 + 1/3")
    d = p.to_json_dict()
    assert d["n_vars"] == 2
    assert {"exps": {"1": 2}, "coef": "3/2"} in d["terms"]
    assert Polynomial.from_json(p.to_json()) == p


def test_json_rejects_malformed():
    with pytest.raises(ParseError):
        Polynomial.from_json_dict({"terms": [{"exps": {}, "coef": "1"}]})
    with pytest.raises(ParseError):
        Polynomial.from_json_dict({"n_vars": 1, "terms": [{"coef": "1"}]})


def test_map_parse_and_json():
    f = parse_map("x1 + x2, x1*x2")
    assert f.k == 2 and f.n_vars == 2 and f.degree == 2
    g = PolynomialMap.from_json_dict(f.to_json_dict())
    assert g.components == f.components
    with pytest.raises(ParseError):
        parse_map("x1,,x2")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_evaluate_exact_rational_point():
    p = parse("3/2*x1^2*x2 - x3 + 5/2")
    val = p.evaluate([Fraction(1, 2), Fraction(2), Fraction(1, 3)])
    assert val == Fraction(3, 2) * Fraction(1, 4) * 2 - Fraction(1, 3) + Fraction(5, 2)


def test_evaluate_dimension_guard():
    with pytest.raises(DimensionMismatch):
        parse("x2").evaluate([1.0])
    with pytest.raises(DimensionMismatch):
        parse("x2").eval_batch(np.zeros((4, 1)))


def test_eval_batch_matches_pointwise():
    rng = random.Random(7)
    for _ in range(20):
        p = random_rational_poly(rng, n_vars=3, degree=5, n_terms=6)
        pts = np.random.default_rng(11).normal(size=(40, 3))
        batch = p.eval_batch(pts)
        single = np.array([float(p.evaluate([float(x) for x in row])) for row in pts])
        np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-12)


def test_eval_batch_deterministic_rerun():
    p = parse("x1^3 - 2*x2 + 1/7")
    pts = np.random.default_rng(5).normal(size=(100, 2))
    a = p.eval_batch(pts)
    b = p.eval_batch(pts)
    assert a.tobytes() == b.tobytes()


def test_kernel_paths_agree_bitwise():
    from gpm import _kernels

    p = parse("x1^4 - 3*x1*x2^2 + 1/3*x2 - 2")
    pts = np.random.default_rng(3).normal(size=(512, 2))
    coefs, starts, var_idx, powers = p._compile()
    a = _kernels._poly_eval_batch_numpy(pts, coefs, starts, var_idx, powers)
    if _kernels.HAS_NUMBA:
        b = _kernels._poly_eval_batch_numba(
            np.ascontiguousarray(pts), coefs, starts, var_idx, powers
        )
        assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------------------
# derivatives and the OU generator
# ---------------------------------------------------------------------------


def test_partial_derivative_known():
    p = parse("x1^3*x2 - 2*x2")
    assert p.partial_derivative(1) == parse("3*x1^2*x2")
    assert p.partial_derivative(2) == parse("x1^3 - 2")
    assert p.partial_derivative(1).partial_derivative(2) == parse("3*x1^2")


def test_partial_derivative_finite_difference():
    rng = random.Random(3)
    fd_rng = np.random.default_rng(17)
    for _ in range(10):
        p = random_rational_poly(rng, n_vars=3, degree=4, n_terms=5)
        x = fd_rng.normal(size=3) * 0.5
        h = 1e-6
        for i in range(1, 4):
            xp = x.copy()
            xm = x.copy()
            xp[i - 1] += h
            xm[i - 1] -= h
            fd = (
                float(p.evaluate([float(v) for v in xp]))
                - float(p.evaluate([float(v) for v in xm]))
            ) / (2 * h)
            exact = float(p.partial_derivative(i).evaluate([float(v) for v in x]))
            assert abs(fd - exact) < 1e-5 * max(1.0, abs(exact))


def test_gradient_shape():
    p = parse("x1*x3")
    g = p.gradient()
    assert len(g) == 3
    assert g[0] == parse("x3") and g[1].is_zero and g[2] == parse("x1")


def test_ou_apply_square():
    assert ou_apply(parse("x1^2")) == parse("2 - 2*x1^2")


def test_ou_hermite_eigenfunctions():
    # L He_k = -k He_k, the defining spectral fact used everywhere downstream
    for k in range(7):
        h = hermite_polynomial(k)
        assert ou_apply(h) == h * Fraction(-k)
    prod = hermite_polynomial(2, var=1) * hermite_polynomial(3, var=2)
    assert ou_apply(prod) == prod * Fraction(-5)


def test_integration_by_parts_exact():
    # E[phi L psi] = -E[<grad phi, grad psi>], exact on 100 random pairs
    rng = random.Random(91)
    for _ in range(100):
        phi = random_rational_poly(rng, n_vars=3, degree=4, n_terms=4)
        psi = random_rational_poly(rng, n_vars=3, degree=4, n_terms=4)
        lhs = gaussian_moment(phi * ou_apply(psi))
        rhs = -sum(
            (
                gaussian_moment(phi.partial_derivative(i) * psi.partial_derivative(i))
                for i in range(1, 4)
            ),
            Fraction(0),
        )
        assert lhs == rhs


# ---------------------------------------------------------------------------
# Gaussian moments
# ---------------------------------------------------------------------------


def test_moment_1d_table():
    assert [_gaussian_moment_1d(e) for e in range(9)] == [1, 0, 1, 0, 3, 0, 15, 0, 105]


@pytest.mark.parametrize("e", range(0, 13))
def test_moment_1d_against_quadrature(e):
    assert abs(_gaussian_moment_1d(e) - quad_gaussian_moment_1d(e)) < 1e-6 * max(
        1.0, _gaussian_moment_1d(e)
    )


def test_gaussian_moment_factorizes():
    p = parse("x1^2*x2^4")
    assert gaussian_moment(p) == 3  # 1!! * 3!!
    assert gaussian_moment(parse("x1^2*x2^3")) == 0


def test_gaussian_moment_2d_quadrature_oracle():
    p = parse("x1^2*x2^2 + x1*x2 - 3")

    def integrand(y, x):
        v = x * x * y * y + x * y - 3
        return v * math.exp(-0.5 * (x * x + y * y)) / (2 * math.pi)

    val, err = integrate.dblquad(integrand, -10, 10, -10, 10, epsabs=1e-10)
    assert abs(float(gaussian_moment(p)) - val) < 1e-7


def test_variance_and_l2():
    assert variance(parse("x1^2")) == 2
    assert variance(parse("x1 + 5")) == 1
    assert l2_norm(hermite_polynomial(2)) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_gaussian_inner_pads_n_vars():
    assert gaussian_inner(parse("x1"), parse("x2")) == 0
    assert gaussian_inner(parse("x1 + x2"), parse("x1")) == 1


def test_lp_norm_mc_matches_exact_l2():
    p = parse("x1^2 - 1 + x2")
    est, se = lp_norm_mc(p, 2.0, 200_000, seed=123)
    exact = l2_norm(p)
    assert se > 0
    assert abs(est - exact) < 3 * se


def test_lp_norm_mc_seed_reproducible():
    p = parse("x1^3")
    a = lp_norm_mc(p, 1.0, 50_000, seed=9)
    b = lp_norm_mc(p, 1.0, 50_000, seed=9)
    assert a == b


# ---------------------------------------------------------------------------
# Hermite basis and chaos decomposition
# ---------------------------------------------------------------------------


def test_hermite_first_few():
    assert hermite_polynomial(0) == parse("1")
    assert hermite_polynomial(1) == parse("x1")
    assert hermite_polynomial(2) == parse("x1^2 - 1")
    assert hermite_polynomial(3) == parse("x1^3 - 3*x1")
    assert hermite_polynomial(4) == parse("x1^4 - 6*x1^2 + 3")


def test_hermite_orthogonality_exact():
    # E[He_i He_j] = delta_ij * i!, checked exactly for i, j <= 8
    for i in range(9):
        for j in range(9):
            expected = Fraction(math.factorial(i)) if i == j else Fraction(0)
            assert gaussian_inner(hermite_polynomial(i), hermite_polynomial(j)) == expected


def test_hermite_product_orthogonality():
    a = hermite_polynomial(2, var=1) * hermite_polynomial(1, var=2)
    b = hermite_polynomial(1, var=1) * hermite_polynomial(2, var=2)
    assert gaussian_inner(a, a) == 2
    assert gaussian_inner(a, b) == 0


def test_decompose_known_square():
    dec = hermite_decompose(parse("x1^2"))
    assert dec.component(0) == parse("1")
    assert dec.component(1).is_zero
    assert dec.component(2) == parse("x1^2 - 1")


def test_decompose_round_trip_exact_100():
    rng = random.Random(2024)
    for _ in range(100):
        p = random_rational_poly(rng, n_vars=4, degree=6, n_terms=8)
        dec = hermite_decompose(p)
        total = Polynomial.zero(p.n_vars)
        for comp in dec.components:
            total = total + comp
        assert total == p


def test_decompose_components_orthogonal_and_parseval():
    rng = random.Random(55)
    for _ in range(25):
        p = random_rational_poly(rng, n_vars=3, degree=5, n_terms=6)
        dec = hermite_decompose(p)
        for i in range(len(dec.components)):
            for j in range(i + 1, len(dec.components)):
                assert gaussian_inner(dec.components[i], dec.components[j]) == 0
        total_var = sum(
            (gaussian_inner(c, c) for c in dec.components[1:]), Fraction(0)
        )
        assert total_var == variance(p)


def test_chaos_energy_identity():
    # sum_k k ||comp_k||^2 = E|grad p|^2, the spectral identity behind the
    # reverse Poincare bound with constant d
    rng = random.Random(77)
    for _ in range(25):
        p = random_rational_poly(rng, n_vars=3, degree=5, n_terms=6)
        dec = hermite_decompose(p)
        lhs = sum(
            (Fraction(k) * gaussian_inner(c, c) for k, c in enumerate(dec.components)),
            Fraction(0),
        )
        rhs = sum(
            (
                gaussian_moment(p.partial_derivative(i) * p.partial_derivative(i))
                for i in range(1, 4)
            ),
            Fraction(0),
        )
        assert lhs == rhs


def test_hermite_terms_exposed():
    dec = hermite_decompose(parse("x1^3"))
    # x^3 = He_3 + 3 He_1
    assert dec.hermite_terms[((1, 3),)] == 1
    assert dec.hermite_terms[((1, 1),)] == 3
