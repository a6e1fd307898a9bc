"""Acceptance suite: one test per release criterion.

Each test prints a single `criterion NN <name>: PASS` line on success, so
a verbose run doubles as the sign-off checklist.  Tolerances and time
budgets are part of the criteria and are asserted, not just observed.
"""
import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import norm

from gpm import measure
from gpm.besov import besov_order_fit, gaussian_radial_moment, hll_constant
from gpm.cli import main as cli_main
from gpm.malliavin import (
    carbery_wright_profile,
    det_perturbation_bound,
    reverse_poincare_check,
)
from gpm.metrics import fm_distance, kantorovich_1d, kantorovich_kd, kr_distance, tv_distance
from gpm.polynomial import (
    Polynomial,
    gaussian_inner,
    gaussian_moment,
    hermite_decompose,
    hermite_polynomial,
    ou_apply,
    parse,
)
from gpm.sampling import Gaussian1D, GridDensity, MonomialPower, ProductLaw, SampleSet
from gpm.verify import (
    parse_measure_spec,
    verify_frac_hll,
    verify_poly_besov,
    verify_tv_vs_kantorovich,
    verify_tv_vs_l2,
)


def ok(n, name):
    print(f"criterion {n:02d} {name}: PASS")


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


def atoms_from_counts(xs, counts, dim=1):
    rows = np.repeat(
        np.atleast_2d(np.asarray(xs, dtype=np.float64).reshape(len(xs), dim)),
        counts,
        axis=0,
    )
    return SampleSet(points=rows, seed=0)


def random_discrete_pair(rng, n_points, dim=1, scale=3.0):
    pts = rng.uniform(-scale, scale, size=(n_points, dim))
    ca = rng.integers(0, 5, size=n_points)
    cb = rng.integers(0, 5, size=n_points)
    if ca.sum() == 0:
        ca[0] = 1
    if cb.sum() == 0:
        cb[-1] = 1
    wa = ca / ca.sum()
    wb = cb / cb.sum()
    mu = atoms_from_counts(pts[ca > 0], ca[ca > 0], dim)
    nu = atoms_from_counts(pts[cb > 0], cb[cb > 0], dim)
    return pts, wa, wb, mu, nu


# ---------------------------------------------------------------------------
# 1. monomial translate family: exact transport cost, exact TV, TV rate 1/d
# ---------------------------------------------------------------------------


def test_criterion_01_monomial_translate_family():
    t0 = time.perf_counter()
    h_grid = np.geomspace(1e-4, 1e-1, 13)
    for d in (2, 3, 4):
        law = MonomialPower(d, 0.0, "folded" if d % 2 else "signed")
        base = measure(law)
        tvs = []
        for h in h_grid:
            shifted = measure(law.shifted(float(h)))
            dk = kantorovich_1d(base, shifted)
            assert abs(dk - h) <= 1e-8
            tv = tv_distance(base, shifted)
            assert abs(tv - 2.0 * (2.0 * norm.cdf(h ** (1.0 / d)) - 1.0)) <= 1e-6
            tvs.append(tv)
        small = h_grid <= 1e-2 + 1e-15
        slope = np.polyfit(np.log(h_grid[small]), np.log(np.asarray(tvs)[small]), 1)[0]
        assert abs(slope - 1.0 / d) <= 0.02
    assert time.perf_counter() - t0 < 10.0
    ok(1, "monomial translate family")


# ---------------------------------------------------------------------------
# 2. fractional smoothing bound across >= 20 pairs and four orders
# ---------------------------------------------------------------------------

SMOOTHING_PAIRS_1D = [
    # Gaussian location, k = 1
    ("gauss(0,1)", "gauss(0.1,1)"),
    ("gauss(0,1)", "gauss(0.35,1)"),
    ("gauss(0,1)", "gauss(0.8,1)"),
    ("gauss(0,1)", "gauss(1.5,1)"),
    ("gauss(1,2)", "gauss(1.3,2)"),
    ("gauss(0,0.8)", "gauss(0.3,0.8)"),
    # Gaussian scale and mixed, k = 1
    ("gauss(0,1)", "gauss(0,1.15)"),
    ("gauss(0,1)", "gauss(0,1.5)"),
    ("gauss(0.2,0.9)", "gauss(0,1.2)"),
    ("gauss(0,1)", "gauss(0.5,1.25)"),
    # chi-square(1) against its shifts
    ("chisq1()", "monpow(2,0.05)"),
    ("chisq1()", "monpow(2,0.2)"),
    # shifted monomial laws (difference profiles resolve degree <= 3)
    ("monpow(2,0)", "monpow(2,0.15)"),
    ("monpow(2,0.1)", "monpow(2,0.3)"),
    ("monpow(3,0,folded)", "monpow(3,0.3,folded)"),
    ("monpow(3,0,folded)", "monpow(3,0.1,folded)"),
    ("monpow(3,0)", "monpow(3,0.2)"),
]

SMOOTHING_SHIFTS_2D = [(0.3, 0.4), (0.25, 0.0), (0.15, 0.15)]

ALPHAS = (0.25, 0.5, 0.75, 1.0)


def test_criterion_02_fractional_smoothing_sweep():
    t0 = time.perf_counter()
    for k in (1, 2, 3):
        for alpha in ALPHAS:
            closed = 1.0 + math.exp(
                0.5 * alpha * math.log(2.0) + gammaln((k + alpha) / 2.0) - gammaln(k / 2.0)
            )
            assert abs(hll_constant(k, alpha) - closed) <= 1e-10
    n_pairs = 0
    for a, b in SMOOTHING_PAIRS_1D:
        mu, nu = parse_measure_spec(a), parse_measure_spec(b)
        n_pairs += 1
        for alpha in ALPHAS:
            rep = verify_frac_hll(mu, nu, alpha)
            assert rep.ratio <= 1.05, (a, b, alpha, rep.ratio)
            assert rep.status in ("pass", "pass-marginal")
    std2 = ProductLaw((Gaussian1D(0, 1), Gaussian1D(0, 1)))
    for shift in SMOOTHING_SHIFTS_2D:
        mu, nu = measure(std2), measure(std2.shifted(shift))
        n_pairs += 1
        for alpha in ALPHAS:
            rep = verify_frac_hll(mu, nu, alpha)
            assert rep.ratio <= 1.05, (shift, alpha, rep.ratio)
            assert rep.status in ("pass", "pass-marginal")
    assert n_pairs >= 20
    assert time.perf_counter() - t0 < 120.0
    ok(2, "fractional smoothing sweep")


# ---------------------------------------------------------------------------
# 3. classical order-one bound in squared form with the BV seminorm
# ---------------------------------------------------------------------------


def test_criterion_03_classical_squared_form():
    pairs = [
        ("gauss(0,1)", "gauss(0.2,1)"),
        ("gauss(0,1)", "gauss(0.5,1)"),
        ("gauss(0,1)", "gauss(1,1)"),
        ("gauss(0,1)", "gauss(0,1.3)"),
        ("gauss(0.3,1.2)", "gauss(0,1)"),
    ]
    c1 = hll_constant(1, 1.0)
    for a, b in pairs:
        rep = verify_frac_hll(parse_measure_spec(a), parse_measure_spec(b), 1.0, b_source="bv")
        tv = rep.lhs
        dk = rep.details["kantorovich"]
        bv = rep.details["seminorm"]
        assert rep.rhs == pytest.approx(c1 * math.sqrt(bv * dk), rel=1e-12)
        assert tv**2 <= 1.05 * c1**2 * dk * bv, (a, b)
    ok(3, "classical squared form")


# ---------------------------------------------------------------------------
# 4. Gaussian reference values on grids; discrete special values
# ---------------------------------------------------------------------------


def test_criterion_04_reference_values():
    n = 2**14
    for h in (0.05, 0.3, 1.0):
        lo, hi = -9.0, 9.0 + h
        x = np.linspace(lo, hi, n)
        mu = measure(GridDensity(axes=((lo, hi, n),), values=norm.pdf(x)))
        nu = measure(GridDensity(axes=((lo, hi, n),), values=norm.pdf(x - h)))
        assert tv_distance(mu, nu) == pytest.approx(
            2.0 * (2.0 * norm.cdf(h / 2.0) - 1.0), abs=1e-6
        )
        assert kantorovich_1d(mu, nu, n=n) == pytest.approx(h, abs=1e-6)

    rng = np.random.default_rng(3)
    xa = rng.standard_normal(4096)
    xb = 0.4 + 1.2 * rng.standard_normal(4096)
    w1 = kantorovich_1d(SampleSet(points=xa[:, None]), SampleSet(points=xb[:, None]))
    assert w1 == float(np.mean(np.abs(np.sort(xa) - np.sort(xb))))

    delta0 = SampleSet(points=np.array([[0.0]]))
    delta1 = SampleSet(points=np.array([[1.0]]))
    delta3 = SampleSet(points=np.array([[3.0]]))
    assert fm_distance(delta0, delta1) == pytest.approx(2.0 / 3.0, abs=1e-9)
    assert kr_distance(delta0, delta3) == pytest.approx(2.0, abs=1e-9)
    ok(4, "reference values")


# ---------------------------------------------------------------------------
# 5. transport metric ordering chain on 200 random discrete pairs
# ---------------------------------------------------------------------------


def test_criterion_05_metric_ordering_chain():
    rng = np.random.default_rng(47)
    for trial in range(200):
        dim = 2 if trial % 7 == 0 else 1
        hi = 9 if dim == 2 else 13
        _, _, _, mu, nu = random_discrete_pair(rng, int(rng.integers(2, hi)), dim=dim)
        fm = fm_distance(mu, nu)
        kr = kr_distance(mu, nu)
        tv = tv_distance(mu, nu)
        w1 = kantorovich_1d(mu, nu) if dim == 1 else kantorovich_kd(mu, nu)
        assert fm <= kr + 1e-9
        assert kr <= min(w1, tv) + 1e-9
        assert kr <= 2.0 * fm + 1e-9
    ok(5, "metric ordering chain")


# ---------------------------------------------------------------------------
# 6. determinant perturbation bound on random symmetric batches
# ---------------------------------------------------------------------------


def test_criterion_06_det_perturbation_batch():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    for k in range(1, 7):
        a = rng.uniform(-10, 10, size=(10_000, k, k))
        b = rng.uniform(-10, 10, size=(10_000, k, k))
        a = (a + np.transpose(a, (0, 2, 1))) / 2.0
        b = (b + np.transpose(b, (0, 2, 1))) / 2.0
        res = det_perturbation_bound(a, b)
        assert res["holds"]
        slack = res["rhs"] - res["lhs"]
        scale = np.maximum(1.0, res["rhs"])
        assert np.min(slack / scale) >= -1e-12
    assert time.perf_counter() - t0 < 5.0
    ok(6, "determinant perturbation batch")


# ---------------------------------------------------------------------------
# 7. reverse Poincare inequality with constant d, equality on top chaos
# ---------------------------------------------------------------------------


def test_criterion_07_reverse_poincare():
    rng = random.Random(77)
    for _ in range(100):
        p = random_rational_poly(rng, rng.randint(1, 6), rng.randint(1, 5), rng.randint(1, 5))
        res = reverse_poincare_check(p)
        assert res["holds"]
    for eq in (
        hermite_polynomial(1),
        hermite_polynomial(3),
        hermite_polynomial(5),
        hermite_polynomial(2, var=1) * hermite_polynomial(3, var=2),
        parse("x1^2"),
    ):
        assert reverse_poincare_check(eq)["equality"]
    cubic = reverse_poincare_check(parse("x1^3"))
    assert (cubic["lhs"], cubic["rhs"]) == (27.0, 45.0)
    assert not cubic["equality"]
    mixed = reverse_poincare_check(parse("x1^3 + x1"))
    assert (mixed["lhs"], mixed["rhs"]) == (34.0, 66.0)
    ok(7, "reverse poincare")


# ---------------------------------------------------------------------------
# 8. Hermite calculus: orthogonality, round-trip, integration by parts
# ---------------------------------------------------------------------------


def test_criterion_08_hermite_calculus():
    for i in range(9):
        for j in range(9):
            expected = Fraction(math.factorial(i)) if i == j else Fraction(0)
            assert gaussian_inner(hermite_polynomial(i), hermite_polynomial(j)) == expected

    rng = random.Random(13)
    for _ in range(100):
        p = random_rational_poly(rng, rng.randint(1, 4), rng.randint(0, 5), rng.randint(1, 5))
        dec = hermite_decompose(p)
        total = Polynomial.zero(p.n_vars)
        for comp in dec.components:
            total = total + comp
        assert total == p

    rng = random.Random(91)
    for _ in range(100):
        phi = random_rational_poly(rng, 3, 4, 4)
        psi = random_rational_poly(rng, 3, 4, 4)
        lhs = gaussian_moment(phi * ou_apply(psi))
        rhs = -sum(
            (
                gaussian_moment(phi.partial_derivative(i) * psi.partial_derivative(i))
                for i in range(1, 4)
            ),
            Fraction(0),
        )
        assert lhs == rhs
    ok(8, "hermite calculus")


# ---------------------------------------------------------------------------
# 9. small-ball ratio profiles: exact powers and Monte Carlo chi-square
# ---------------------------------------------------------------------------


def test_criterion_09_small_ball_profiles():
    for d in (1, 2, 3, 4):
        prof = carbery_wright_profile(parse(f"x1^{d}" if d > 1 else "x1"))
        assert prof["exact"]
        abs_moment = math.exp(
            0.5 * d * math.log(2.0) + gammaln((d + 1) / 2.0) - 0.5 * math.log(math.pi)
        )
        oracle = math.sqrt(2.0 / math.pi) * abs_moment ** (1.0 / d) / d
        assert abs(prof["sup_ratio"] - oracle) <= 1e-4

    prof = carbery_wright_profile(parse("x1^2 - 1"), n_samples=1_000_000, seed=0)
    assert not prof["exact"]
    t = prof["t"]
    exact = 2.0 * (
        norm.cdf(np.sqrt(1.0 + t)) - norm.cdf(np.sqrt(np.maximum(1.0 - t, 0.0)))
    )
    z = np.abs(prof["prob"] - exact) / prof["prob_se"]
    assert np.max(z) <= 3.0
    assert prof["abs_moment"] == pytest.approx(4.0 * norm.pdf(1.0), rel=0.02)
    ok(9, "small-ball profiles")


# ---------------------------------------------------------------------------
# 10. fitted smoothness orders of image laws
# ---------------------------------------------------------------------------


def test_criterion_10_image_law_orders():
    for d in (2, 3, 4):
        rep = verify_poly_besov(f"x1^{d}", alpha=1.0 / d)
        assert abs(rep.details["alpha_hat"] - 1.0 / d) <= 0.05
        assert abs(rep.rhs - 1.0 / d) <= 0.05
    rep = verify_poly_besov("x1", alpha=1.0)
    assert abs(rep.details["alpha_hat"] - 1.0) <= 0.05

    rep = verify_poly_besov(
        "x1 + x2, x1*x2", alpha=0.125, n_samples=200_000, seed=7, max_decades=1.0
    )
    assert rep.status == "pass"
    assert rep.details["expected_det"] == 2.0
    assert rep.rhs >= 0.075  # slope on the smallest decade of shifts
    ok(10, "image law orders")


# ---------------------------------------------------------------------------
# 11. TV-vs-transport rate studies: stability and monomial slopes
# ---------------------------------------------------------------------------


def test_criterion_11_rate_studies():
    deltas = np.geomspace(1e-3, 1e-1, 9)  # two decades
    for spec, regime in (
        ("monpow(2,0)", "monomial"),
        ("monpow(3,0)", "one-dim"),
        ("gauss(0,1)", "general-k"),
    ):
        rep = verify_tv_vs_kantorovich(parse_measure_spec(spec), deltas, regime=regime)
        assert rep.status == "report"
        assert rep.details["max_over_median"] <= 10.0

    from gpm.sampling import pushforward, sample_gaussian

    rates = []
    for seed in (11, 12):
        law = measure(pushforward(parse("x1^2 + x1"), sample_gaussian(1, 30_000, seed)))
        rep = verify_tv_vs_kantorovich(law, deltas, regime="one-dim", degree=2, seed=seed)
        rates.append(rep.details["max_over_median"])
    assert abs(rates[0] - rates[1]) / rates[0] < 0.2

    for d in (2, 3, 4):
        rep = verify_tv_vs_l2(f"x1^{d}", np.geomspace(1e-4, 1e-2, 9))
        assert abs(rep.details["loglog_slope"] - 1.0 / d) <= 0.02
    ok(11, "rate studies")


# ---------------------------------------------------------------------------
# 12. the default suite replays byte-identically and exits clean
# ---------------------------------------------------------------------------


def test_criterion_12_default_suite_reproducible(tmp_path, capsys):
    t0 = time.perf_counter()
    dirs = [tmp_path / "run_a", tmp_path / "run_b"]
    for d in dirs:
        code = cli_main(
            ["verify", "--suite", "paper-default", "--seed", "42", "--out", str(d),
             "--no-timestamp"]
        )
        assert code == 0
    capsys.readouterr()
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    assert "summary.csv" in names
    assert len(names) == 23  # 22 checks + the summary
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    header = (dirs[0] / "summary.csv").read_text().splitlines()[0]
    assert header == "theorem,lhs,rhs,ratio,pass"
    for line in (dirs[0] / "summary.csv").read_text().splitlines()[1:]:
        assert line.endswith(",true") or line.endswith(",na")
    assert time.perf_counter() - t0 < 600.0
    ok(12, "default suite reproducible")
