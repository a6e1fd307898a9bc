"""End-to-end tests of the command-line interface."""
import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from gpm.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


# ---------------------------------------------------------------------------
# dist
# ---------------------------------------------------------------------------


def test_dist_tv_gaussian_unit_shift(capsys):
    payload = run_json(
        capsys, "dist", "--metric", "tv", "--a", "gauss(0,1)", "--b", "gauss(1,1)",
        "--no-timestamp",
    )
    assert payload["schema"] == "gpm/1"
    expected = 2.0 * (2.0 * norm.cdf(0.5) - 1.0)
    assert payload["value"] == pytest.approx(expected, abs=1e-9)
    assert payload["value"] == pytest.approx(0.765850, abs=1e-6)
    assert payload["seed"] == 0
    assert payload["params"]["atoms"] == 2048


def test_dist_kantorovich_monomial_translate(capsys):
    payload = run_json(
        capsys, "dist", "--metric", "k", "--a", "monpow(2,0)", "--b", "monpow(2,0.1)",
        "--no-timestamp",
    )
    assert payload["value"] == pytest.approx(0.1, abs=1e-8)


def test_dist_identical_measures_zero(capsys):
    for metric in ("tv", "k", "kr", "fm"):
        payload = run_json(
            capsys, "dist", "--metric", metric, "--a", "gauss(0,1)", "--b", "gauss(0,1)",
            "--no-timestamp",
        )
        assert payload["value"] == pytest.approx(0.0, abs=1e-9)
        assert not math.copysign(1.0, payload["value"]) < 0  # no -0.0 in output


def test_dist_metric_ordering_via_cli(capsys):
    values = {}
    for metric in ("tv", "k", "kr", "fm"):
        values[metric] = run_json(
            capsys, "dist", "--metric", metric, "--a", "gauss(0,1)", "--b", "gauss(0.7,1)",
            "--no-timestamp",
        )["value"]
    assert values["fm"] <= values["kr"] + 1e-9
    assert values["kr"] <= min(values["k"], values["tv"]) + 1e-9


def test_dist_out_file_and_rerun_identical(tmp_path, capsys):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    argv = ["dist", "--metric", "tv", "--a", "monpow(3,0,folded)", "--b",
            "monpow(3,0.2,folded)", "--no-timestamp"]
    assert main(argv + ["--out", str(out_a)]) == 0
    assert main(argv + ["--out", str(out_b)]) == 0
    capsys.readouterr()
    assert out_a.read_bytes() == out_b.read_bytes()


def test_dist_timestamp_present_by_default(capsys):
    payload = run_json(
        capsys, "dist", "--metric", "tv", "--a", "gauss(0,1)", "--b", "gauss(1,1)"
    )
    assert payload["timestamp"].endswith("+00:00")


def test_dist_bad_spec_exit_2(capsys):
    code, _, err = run_cli(
        capsys, "dist", "--metric", "tv", "--a", "gauss(zz,1)", "--b", "gauss(0,1)"
    )
    assert code == 2
    assert "gauss(zz,1)" in err


def test_dist_bad_metric_exit_2(capsys):
    code, _, _ = run_cli(
        capsys, "dist", "--metric", "w2", "--a", "gauss(0,1)", "--b", "gauss(0,1)"
    )
    assert code == 2


def test_dist_pushforward_seeded_rerun_identical(tmp_path, capsys):
    poly_file = tmp_path / "cubic.txt"
    poly_file.write_text("x1^3 + x1\n")
    argv = [
        "dist", "--metric", "tv", "--a", f"pushforward({poly_file})", "--b", "gauss(0,1)",
        "--samples", "20000", "--seed", "5", "--no-timestamp",
    ]
    first = run_json(capsys, *argv)
    second = run_json(capsys, *argv)
    assert first == second
    assert 0 < first["value"] < 2


# ---------------------------------------------------------------------------
# besov
# ---------------------------------------------------------------------------


def test_besov_fit_square_poly(capsys, tmp_path):
    csv_path = tmp_path / "profile.csv"
    payload = run_json(
        capsys, "besov", "--poly", "x1^2", "--fit", "--csv", str(csv_path),
        "--no-timestamp",
    )
    assert payload["source"]["image"] == "closed-form"
    assert payload["fit"]["alpha_hat"] == pytest.approx(0.5, abs=0.02)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "h,tv"
    assert len(lines) == payload["n_shifts"] + 1


def test_besov_gaussian_seminorm_order_one(capsys):
    payload = run_json(
        capsys, "besov", "--measure", "gauss(0,1)", "--alpha", "1", "--no-timestamp"
    )
    assert payload["seminorm"] == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-4)
    assert payload["seminorm"] == pytest.approx(0.797885, abs=1e-4)


def test_besov_constant_poly_degenerate_exit_1(capsys):
    code, _, err = run_cli(capsys, "besov", "--poly", "3")
    assert code == 1
    assert "degenerate" in err


def test_besov_requires_exactly_one_source(capsys):
    code, _, _ = run_cli(capsys, "besov", "--poly", "x1", "--measure", "gauss(0,1)")
    assert code == 2
    code, _, _ = run_cli(capsys, "besov", "--fit")
    assert code == 2


def test_besov_map_uses_directional_max(capsys):
    payload = run_json(
        capsys, "besov", "--poly", "x1 + x2, x1*x2", "--fit", "--samples", "60000",
        "--per-decade", "12", "--seed", "3", "--no-timestamp",
    )
    assert payload["source"]["image"] == "monte-carlo"
    assert payload["fit"]["alpha_hat"] > 0


def test_besov_window_restricts_fit(capsys):
    wide = run_json(capsys, "besov", "--measure", "monpow(2,0)", "--fit", "--no-timestamp")
    narrow = run_json(
        capsys, "besov", "--measure", "monpow(2,0)", "--fit", "--window", "1e-3,1e-2",
        "--no-timestamp",
    )
    assert narrow["fit"]["n_points"] < wide["fit"]["n_points"]
    assert narrow["fit"]["alpha_hat"] == pytest.approx(0.5, abs=0.05)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_single_check_frac_hll(capsys):
    payload = run_json(
        capsys, "verify", "--check", "frac-hll", "--a", "gauss(0,1)", "--b",
        "gauss(0.2,1)", "--alpha", "0.5", "--no-timestamp",
    )
    assert payload["check"] == "frac_hll"
    assert payload["status"] == "pass"
    assert payload["params"]["alpha"] == 0.5
    assert payload["ratio"] <= 1.0


def test_verify_single_check_failing_exit_1(capsys):
    code, out, _ = run_cli(
        capsys, "verify", "--check", "poly-besov", "--poly", "x1^2", "--alpha", "0.9",
        "--no-timestamp",
    )
    assert code == 1
    assert json.loads(out)["status"] == "fail"


def test_verify_check_missing_param_exit_2(capsys):
    code, _, err = run_cli(
        capsys, "verify", "--check", "frac-hll", "--a", "gauss(0,1)", "--b", "gauss(0.2,1)"
    )
    assert code == 2
    assert "alpha" in err


def test_verify_unknown_check_exit_2(capsys):
    code, _, err = run_cli(capsys, "verify", "--check", "no-such-check")
    assert code == 2
    assert "unknown check" in err


def test_verify_flag_not_accepted_by_check_exit_2(capsys):
    code, _, err = run_cli(
        capsys, "verify", "--check", "frac-hll", "--a", "gauss(0,1)", "--b",
        "gauss(0.2,1)", "--alpha", "0.5", "--deltas", "0.1,0.2",
    )
    assert code == 2
    assert "--deltas" in err


def test_verify_param_flag_without_check_exit_2(capsys):
    code, _, err = run_cli(capsys, "verify", "--a", "gauss(0,1)")
    assert code == 2
    assert "--check" in err


FAST_SUITE = {
    "suite": [
        {
            "check": "set_bound",
            "params": {"nu": "chisq1()", "interval": [0.0, 0.01], "alpha": 0.45},
        },
        {
            "check": "tv_vs_kantorovich",
            "params": {
                "law": "monpow(2,0)",
                "deltas": [0.001, 0.01, 0.1],
                "regime": "monomial",
            },
        },
    ]
}


def test_verify_suite_config_file(tmp_path, capsys):
    config = tmp_path / "suite.json"
    config.write_text(json.dumps(FAST_SUITE))
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys, "verify", "--suite", str(config), "--out", str(out_dir), "--seed", "42",
        "--no-timestamp",
    )
    assert code == 0
    assert "2 checks, 0 failed" in out
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["00-set_bound.json", "01-tv_vs_kantorovich.json", "summary.csv"]
    header = (out_dir / "summary.csv").read_text().splitlines()[0]
    assert header == "theorem,lhs,rhs,ratio,pass"


def test_verify_suite_rerun_byte_identical(tmp_path, capsys):
    config = tmp_path / "suite.json"
    config.write_text(json.dumps(FAST_SUITE))
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        code, _, _ = run_cli(
            capsys, "verify", "--suite", str(config), "--out", str(d), "--seed", "42",
            "--no-timestamp",
        )
        assert code == 0
    for name in ("00-set_bound.json", "01-tv_vs_kantorovich.json", "summary.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_verify_malformed_config_exit_2(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text("{not json")
    code, _, err = run_cli(capsys, "verify", "--suite", str(config))
    assert code == 2
    assert "JSON" in err
    config.write_text(json.dumps({"entries": []}))
    code, _, _ = run_cli(capsys, "verify", "--suite", str(config))
    assert code == 2


def test_verify_failing_suite_exit_1(tmp_path, capsys):
    config = tmp_path / "suite.json"
    config.write_text(json.dumps({
        "suite": [{"check": "poly_besov", "params": {"poly": "x1^2", "alpha": 0.9}}]
    }))
    code, out, _ = run_cli(capsys, "verify", "--suite", str(config), "--no-timestamp")
    assert code == 1
    assert "1 failed" in out


def test_verify_single_check_out_dir(tmp_path, capsys):
    out_dir = tmp_path / "single"
    code, out, _ = run_cli(
        capsys, "verify", "--check", "set-bound", "--a", "chisq1()", "--interval",
        "0,0.01", "--alpha", "0.45", "--out", str(out_dir), "--no-timestamp",
    )
    assert code == 0
    payload = json.loads((out_dir / "00-set_bound.json").read_text())
    assert payload["status"] == "pass"
    assert "set-bound" in out


# ---------------------------------------------------------------------------
# malliavin
# ---------------------------------------------------------------------------


def test_malliavin_worked_example(capsys):
    payload = run_json(
        capsys, "malliavin", "--map", "x1 + x2, x1*x2", "--no-timestamp"
    )
    assert payload["expected_det"] == pytest.approx(2.0, abs=1e-12)
    assert payload["expected_det_mode"] == "exact"
    assert payload["det_symbolic"] == "-2*x1*x2 + x1^2 + x2^2"
    assert payload["flags"] == {"degenerate": False, "grad_star_positive": True}
    sigmas = [c["sigma"] for c in payload["components"]]
    assert sigmas == pytest.approx([math.sqrt(2.0), 1.0])
    stars = [c["grad_star"] for c in payload["components"]]
    assert stars == pytest.approx([math.sqrt(2.0), 1.0])


def test_malliavin_identity_pair(capsys):
    payload = run_json(capsys, "malliavin", "--map", "x1, x2", "--no-timestamp")
    assert payload["expected_det"] == pytest.approx(1.0, abs=1e-12)
    assert not payload["flags"]["degenerate"]


def test_malliavin_repeated_component_degenerate(capsys):
    payload = run_json(capsys, "malliavin", "--map", "x1, x1", "--no-timestamp")
    assert payload["expected_det"] == 0.0
    assert payload["flags"]["degenerate"]


def test_malliavin_k4_monte_carlo(capsys):
    payload = run_json(
        capsys, "malliavin", "--map", "x1, x2, x3, x4", "--samples", "5000",
        "--no-timestamp",
    )
    assert payload["expected_det_mode"] == "mc"
    assert payload["expected_det"] == pytest.approx(1.0, abs=1e-9)
    assert "expected_det_se" in payload
    assert "det_symbolic" not in payload


def test_malliavin_single_poly(capsys):
    payload = run_json(capsys, "malliavin", "--map", "x1^2", "--no-timestamp")
    assert payload["k"] == 1
    assert payload["expected_det"] == pytest.approx(4.0, abs=1e-12)
    assert payload["components"][0]["grad_star"] == pytest.approx(2.0)


def test_malliavin_bad_expression_exit_2(capsys):
    code, _, _ = run_cli(capsys, "malliavin", "--map", "x1 +* x2")
    assert code == 2


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def test_help_exits_zero_everywhere(capsys):
    for argv in (["--help"], ["dist", "--help"], ["besov", "--help"],
                 ["verify", "--help"], ["malliavin", "--help"]):
        code, out, _ = run_cli(capsys, *argv)
        assert code == 0
        assert "usage" in out


def test_no_arguments_exit_2(capsys):
    code, _, _ = run_cli(capsys)
    assert code == 2


def test_thread_cap_env_is_accepted(capsys, monkeypatch):
    monkeypatch.setenv("GPM_THREADS", "1")
    payload = run_json(
        capsys, "dist", "--metric", "tv", "--a", "gauss(0,1)", "--b", "gauss(0.5,1)",
        "--no-timestamp",
    )
    assert payload["value"] == pytest.approx(2.0 * (2.0 * norm.cdf(0.25) - 1.0), abs=1e-9)


def test_seed_recorded_in_every_command(capsys):
    dist = run_json(
        capsys, "dist", "--metric", "tv", "--a", "gauss(0,1)", "--b", "gauss(1,1)",
        "--seed", "7", "--no-timestamp",
    )
    besov = run_json(
        capsys, "besov", "--measure", "gauss(0,1)", "--alpha", "0.5", "--seed", "7",
        "--no-timestamp",
    )
    mall = run_json(capsys, "malliavin", "--map", "x1^2", "--seed", "7", "--no-timestamp")
    assert dist["seed"] == besov["seed"] == mall["seed"] == 7
