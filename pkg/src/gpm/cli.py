"""Command-line front end.

Four subcommands:

* ``dist``      distance between two measures given as spec strings;
* ``besov``     shift-TV profile of a measure or of the Gaussian image law
                of a polynomial, with optional seminorm and order fit;
* ``verify``    one inequality check or a whole suite, writing per-check
                JSON plus an aggregate summary.csv;
* ``malliavin`` Gram-determinant and gradient diagnostics for a
                polynomial map.

Results are printed (or written with --out) as JSON under schema gpm/1
with the seed and every resolved parameter recorded, so a rerun of the
same argv is byte-identical once --no-timestamp is passed.  Exit codes:
0 success, 1 computation failure or a failed assertive check, 2 usage
or spec parse errors.  The environment variable GPM_THREADS caps the
thread count of the compiled kernels.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .besov import besov_order_fit, besov_seminorm, shift_tv_profile
from .errors import GpmError, ParseError
from .malliavin import expected_det, grad_star_norm, malliavin_det
from .metrics import fm_distance, kr_distance
from .polynomial import Polynomial, PolynomialMap, variance
from .verify import (
    SCHEMA,
    _jsonify,
    _kantorovich,
    _max_directional_profile,
    _maybe_timestamp,
    _tv,
    describe_measure,
    image_measure,
    parse_measure_spec,
    parse_poly_spec,
    run_check,
    run_suite,
)


def _apply_thread_cap() -> None:
    """Honor GPM_THREADS for the numba kernels; silently a no-op otherwise."""
    raw = os.environ.get("GPM_THREADS")
    if not raw:
        return
    try:
        n = max(1, int(raw))
    except ValueError:
        return
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # threading-layer selection chatter
            import numba

            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _float_pair(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"{flag} expects two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ParseError(f"{flag} expects numbers, got {text!r}") from exc


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ParseError(f"{flag} expects comma-separated numbers, got {text!r}") from exc


def _common_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument(
        "--out", metavar="PATH", default=None, help="write JSON here instead of stdout"
    )
    p.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit the timestamp so reruns are byte-identical",
    )


# ---------------------------------------------------------------------------
# dist
# ---------------------------------------------------------------------------


def cmd_dist(args) -> int:
    mu = parse_measure_spec(args.a, n_samples=args.samples, seed=args.seed)
    nu = parse_measure_spec(args.b, n_samples=args.samples, seed=args.seed + 1)
    if args.metric == "tv":
        value = _tv(mu, nu, args.n)
    elif args.metric == "k":
        value = _kantorovich(mu, nu, args.n)
    elif args.metric == "kr":
        value = kr_distance(mu, nu, n_atoms=args.atoms)
    else:
        value = fm_distance(mu, nu, n_atoms=args.atoms)
    payload = {
        "schema": SCHEMA,
        "command": "dist",
        "metric": args.metric,
        "a": args.a,
        "b": args.b,
        "a_resolved": describe_measure(mu),
        "b_resolved": describe_measure(nu),
        "value": value,
        "params": {
            "n": args.n,
            "atoms": args.atoms,
            "samples": args.samples,
            "seed": args.seed,
        },
        "seed": args.seed,
    }
    ts = _maybe_timestamp(not args.no_timestamp)
    if ts:
        payload["timestamp"] = ts
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# besov
# ---------------------------------------------------------------------------


def cmd_besov(args) -> int:
    source: dict = {}
    if args.poly is not None:
        f = parse_poly_spec(args.poly)
        m = image_measure(f, n_samples=args.samples, seed=args.seed)
        source["poly"] = str(f) if isinstance(f, PolynomialMap) else f.to_string()
        source["image"] = "closed-form" if m.kind == "closed_form" else "monte-carlo"
    else:
        m = parse_measure_spec(args.measure, n_samples=args.samples, seed=args.seed)
        source["measure"] = args.measure
    source["resolved"] = describe_measure(m)

    if m.dim == 1:
        prof = shift_tv_profile(
            m, per_decade=args.per_decade, h_min=args.h_min, h_max=args.h_max, n=args.n
        )
    elif m.dim == 2:
        prof = _max_directional_profile(
            m, per_decade=args.per_decade, h_min=args.h_min, h_max=args.h_max, n=args.n
        )
    else:
        raise GpmError("shift profiles support dimension 1 and 2 only")

    window = _float_pair(args.window, "--window") if args.window else None
    payload = {
        "schema": SCHEMA,
        "command": "besov",
        "source": source,
        "n_shifts": int(prof.h.size),
        "h_range": [float(prof.h.min()), float(prof.h.max())],
        "noise_floor": prof.noise_floor,
        "params": {
            "per_decade": args.per_decade,
            "h_min": args.h_min,
            "h_max": args.h_max,
            "n": args.n,
            "samples": args.samples,
            "seed": args.seed,
            "window": list(window) if window else None,
        },
        "seed": args.seed,
    }
    if args.alpha is not None:
        payload["alpha"] = args.alpha
        payload["seminorm"] = besov_seminorm(prof, args.alpha)
    if args.fit:
        payload["fit"] = besov_order_fit(prof, window)
    if args.csv:
        prof.to_csv(args.csv)
        payload["csv"] = args.csv
    ts = _maybe_timestamp(not args.no_timestamp)
    if ts:
        payload["timestamp"] = ts
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

#: which CLI flag feeds which check parameter ("a"/"b" are measure specs)
_CHECK_FLAGS = {
    "frac_hll": {"a": "mu", "b": "nu"},
    "frac_hll_fm": {"a": "mu", "b": "nu"},
    "set_bound": {"a": "nu"},
    "poly_besov": {},
    "tv_vs_kantorovich": {"a": "law"},
    "tv_vs_l2": {},
    "k_vs_fm": {"a": "mu", "b": "nu"},
    "cw_set_corollary": {},
}

#: scalar flags each check accepts, flag name -> parameter name
_CHECK_SCALARS = {
    "frac_hll": {"alpha": "alpha", "b_source": "b_source", "n": "n"},
    "frac_hll_fm": {"alpha": "alpha", "n": "n", "atoms": "n_atoms"},
    "set_bound": {"alpha": "alpha", "interval": "interval", "n": "n"},
    "poly_besov": {
        "poly": "poly",
        "alpha": "alpha",
        "samples": "n_samples",
        "window": "fit_window",
        "n": "n",
    },
    "tv_vs_kantorovich": {
        "deltas": "deltas",
        "regime": "regime",
        "degree": "degree",
        "tau": "tau",
        "n": "n",
    },
    "tv_vs_l2": {
        "poly": "poly",
        "deltas": "deltas",
        "tau": "tau",
        "window": "slope_window",
        "samples": "n_samples",
        "n": "n",
    },
    "k_vs_fm": {"degree": "degree", "atoms": "n_atoms", "n": "n"},
    "cw_set_corollary": {"poly": "poly", "samples": "n_samples", "tau": "tau"},
}


#: every per-check parameter flag of the verify subcommand (attribute names)
_VERIFY_PARAM_FLAGS = (
    "a",
    "b",
    "poly",
    "alpha",
    "interval",
    "deltas",
    "regime",
    "degree",
    "tau",
    "b_source",
    "window",
    "n",
    "atoms",
    "samples",
)


def _single_check_params(name: str, args) -> dict:
    if name not in _CHECK_FLAGS:
        raise ParseError(f"unknown check {name.replace('_', '-')!r}")
    params: dict = {}
    for flag, key in _CHECK_FLAGS[name].items():
        value = getattr(args, flag)
        if value is not None:
            params[key] = value
    scalars = _CHECK_SCALARS[name]
    converters = {
        "interval": lambda t: list(_float_pair(t, "--interval")),
        "window": lambda t: list(_float_pair(t, "--window")),
        "deltas": lambda t: _float_list(t, "--deltas"),
    }
    for flag, key in scalars.items():
        value = getattr(args, flag)
        if value is None:
            continue
        if flag in converters:
            value = converters[flag](value)
        params[key] = value
    # reject flags that this check does not understand
    for flag in _VERIFY_PARAM_FLAGS:
        if getattr(args, flag) is not None:
            if flag not in _CHECK_FLAGS[name] and flag not in scalars:
                raise ParseError(
                    f"--{flag.replace('_', '-')} is not a parameter of "
                    f"check {name.replace('_', '-')!r}"
                )
    return params


def cmd_verify(args) -> int:
    timestamp = not args.no_timestamp
    if args.check is None:
        for flag in _VERIFY_PARAM_FLAGS:
            if getattr(args, flag) is not None:
                raise ParseError(f"--{flag.replace('_', '-')} requires --check")
    if args.check is not None:
        name = args.check.replace("-", "_")
        params = _single_check_params(name, args)
        try:
            report = run_check(name, params, args.seed, timestamp=timestamp)
        except KeyError as exc:
            raise ParseError(
                f"check {args.check!r} is missing a required parameter: {exc}"
            ) from exc
        out = None
        if args.out:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            out = str(out_dir / f"00-{report.check}.json")
        _emit(report.to_json_dict(), out)
        if out:
            print(report.summary_line())
        return 1 if report.status == "fail" else 0

    def progress(report):
        print(report.summary_line(), flush=True)

    result = run_suite(
        args.suite,
        output_dir=args.out,
        seed=args.seed,
        timestamp=timestamp,
        progress=progress,
    )
    n = len(result.reports)
    print(f"{n} checks, {result.n_failed} failed")
    return result.exit_code


# ---------------------------------------------------------------------------
# malliavin
# ---------------------------------------------------------------------------


def cmd_malliavin(args) -> int:
    f = parse_poly_spec(args.map)
    fmap = f if isinstance(f, PolynomialMap) else PolynomialMap((f,))
    k = fmap.k
    payload: dict = {
        "schema": SCHEMA,
        "command": "malliavin",
        "map": str(fmap),
        "k": k,
        "n_vars": fmap.n_vars,
        "degree": fmap.degree,
        "params": {"det_floor": args.det_floor, "samples": args.samples, "seed": args.seed},
        "seed": args.seed,
    }
    if k <= 3:
        edet = expected_det(fmap)
        payload["expected_det"] = edet
        payload["expected_det_mode"] = "exact"
        payload["det_symbolic"] = malliavin_det(fmap).to_string()
    else:
        edet, se = expected_det(fmap, mode="mc", n_samples=args.samples, seed=args.seed)
        payload["expected_det"] = edet
        payload["expected_det_mode"] = "mc"
        payload["expected_det_se"] = se
    components = []
    for comp in fmap.components:
        components.append(
            {
                "poly": comp.to_string(),
                "degree": comp.degree,
                "sigma": math.sqrt(float(variance(comp))),
                "grad_star": grad_star_norm(comp),
            }
        )
    payload["components"] = components
    payload["flags"] = {
        "degenerate": bool(edet <= args.det_floor),
        "grad_star_positive": bool(all(c["grad_star"] > 0 for c in components)),
    }
    ts = _maybe_timestamp(not args.no_timestamp)
    if ts:
        payload["timestamp"] = ts
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpm",
        description=(
            "Probability metrics, fractional smoothness and Malliavin "
            "diagnostics for polynomial images of Gaussian vectors."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "dist",
        help="distance between two measures",
        description=(
            "Compute a distance between two measures given as spec strings: "
            "gauss(m,s), monpow(d,h[,folded]), chisq1(), grid(file.npz), "
            "samples(file.csv), pushforward(file)."
        ),
    )
    p.add_argument(
        "--metric",
        required=True,
        choices=("tv", "k", "kr", "fm"),
        help="total variation, Kantorovich, Kantorovich-Rubinstein, Fortet-Mourier",
    )
    p.add_argument("--a", required=True, metavar="SPEC", help="first measure")
    p.add_argument("--b", required=True, metavar="SPEC", help="second measure")
    p.add_argument(
        "--n", type=int, default=None, help="grid resolution for rendered densities"
    )
    p.add_argument(
        "--atoms", type=int, default=2048, help="atom budget for kr/fm (default 2048)"
    )
    p.add_argument(
        "--samples",
        type=int,
        default=200_000,
        help="sample count for pushforward specs (default 200000)",
    )
    _common_output_args(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser(
        "besov",
        help="shift-TV profile, seminorm and smoothness-order fit",
        description=(
            "Profile tv(nu, nu shifted by h) over a log grid of h for a "
            "measure or for the Gaussian image law of a polynomial, then "
            "report the order-alpha seminorm (--alpha) and/or the fitted "
            "smoothness order (--fit)."
        ),
    )
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--measure", metavar="SPEC", help="measure spec string")
    group.add_argument(
        "--poly", metavar="EXPR", help="polynomial (or map) whose image law is profiled"
    )
    p.add_argument("--alpha", type=float, default=None, help="seminorm order in (0, 1]")
    p.add_argument("--fit", action="store_true", help="fit the smoothness order")
    p.add_argument(
        "--window", metavar="LO,HI", default=None, help="restrict the fit to h in [LO, HI]"
    )
    p.add_argument("--per-decade", type=int, default=40, help="shifts per decade (default 40)")
    p.add_argument("--h-min", type=float, default=None, help="smallest shift")
    p.add_argument("--h-max", type=float, default=None, help="largest shift")
    p.add_argument("--n", type=int, default=None, help="grid resolution for rendered densities")
    p.add_argument(
        "--samples",
        type=int,
        default=200_000,
        help="sample count for image laws without a closed form (default 200000)",
    )
    p.add_argument("--csv", metavar="PATH", help="also write the (h, tv) profile as CSV")
    _common_output_args(p)
    p.set_defaults(func=cmd_besov)

    p = sub.add_parser(
        "verify",
        help="run one inequality check or a suite of checks",
        description=(
            "Run a named suite (builtin 'paper-default' or a JSON config "
            "path) or a single check (--check frac-hll, frac-hll-fm, "
            "set-bound, poly-besov, tv-vs-kantorovich, tv-vs-l2, k-vs-fm, "
            "cw-set-corollary) with parameters supplied via flags.  Suites "
            "write one JSON file per check plus summary.csv when --out is "
            "given; exit code 1 signals a failed assertive check."
        ),
    )
    group = p.add_mutually_exclusive_group()
    group.add_argument(
        "--suite",
        metavar="NAME|PATH",
        default="paper-default",
        help="builtin suite name or JSON config path (default paper-default)",
    )
    group.add_argument("--check", metavar="NAME", default=None, help="run a single check")
    p.add_argument("--a", metavar="SPEC", default=None, help="first measure of the check")
    p.add_argument("--b", metavar="SPEC", default=None, help="second measure of the check")
    p.add_argument("--poly", metavar="EXPR", default=None, help="polynomial or map")
    p.add_argument("--alpha", type=float, default=None, help="smoothness order")
    p.add_argument("--interval", metavar="A,B", default=None, help="interval for set-bound")
    p.add_argument("--deltas", metavar="D1,D2,...", default=None, help="shift sizes")
    p.add_argument(
        "--regime",
        choices=("general-k", "one-dim", "monomial"),
        default=None,
        help="rate regime for tv-vs-kantorovich",
    )
    p.add_argument("--degree", type=int, default=None, help="polynomial degree of the laws")
    p.add_argument("--tau", type=float, default=None, help="exponent slack")
    p.add_argument("--b-source", dest="b_source", choices=("profile", "bv"), default=None)
    p.add_argument("--window", metavar="LO,HI", default=None, help="fit or slope window")
    p.add_argument("--n", type=int, default=None, help="grid resolution")
    p.add_argument("--atoms", type=int, default=None, help="atom budget for transport metrics")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    _common_output_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "malliavin",
        help="Gram determinant and gradient diagnostics for a polynomial map",
        description=(
            "Report E det of the Malliavin Gram matrix (exact for k <= 3, "
            "Monte Carlo beyond), per-component standard deviations and "
            "dual gradient norms, and the resulting nondegeneracy flags."
        ),
    )
    p.add_argument(
        "--map",
        "--poly",
        dest="map",
        required=True,
        metavar="EXPR",
        help="components separated by commas, e.g. 'x1 + x2, x1*x2'",
    )
    p.add_argument(
        "--det-floor",
        type=float,
        default=1e-6,
        help="degeneracy threshold on E det (default 1e-6)",
    )
    p.add_argument(
        "--samples",
        type=int,
        default=200_000,
        help="Monte Carlo samples when k > 3 (default 200000)",
    )
    _common_output_args(p)
    p.set_defaults(func=cmd_malliavin)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else (0 if code is None else 2)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"gpm: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"gpm: {exc}", file=sys.stderr)
        return 2
    except GpmError as exc:
        print(f"gpm: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"gpm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
