"""Config parsing, exit codes and file outputs of the batch front door.

Solve/sweep runs here use the Thomas-Fermi kind on coarse grids so the whole
module stays fast; the heavy numerics are covered elsewhere.
"""

import hashlib
import json

import pytest

from gpplab.cli import ConfigError, main, parse_config


def write_config(tmp_path, name="cfg.json", **overrides):
    payload = dict(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def tf_solve_config(tmp_path, out, **extra):
    return write_config(
        tmp_path,
        command="solve",
        alpha=2.0,
        rho=1.0,
        kinds=["thomas-fermi"],
        grid={"n": 256, "r_max": 12.0},
        output_dir=str(out),
        **extra,
    )


def tf_sweep_config(tmp_path, out, rhos=(1.0, 2.0, 3.0, 4.0), **extra):
    return write_config(
        tmp_path,
        command="sweep",
        alpha=2.0,
        rho_list=list(rhos),
        kinds=["thomas-fermi"],
        grid={"n": 256, "r_max": 12.0},
        output_dir=str(out),
        **extra,
    )


# ---------------------------------------------------------------------------
# parsing


def test_parse_config_happy_path(tmp_path):
    path = tf_sweep_config(tmp_path, tmp_path / "out")
    cfg = parse_config(path)
    assert cfg.command == "sweep"
    assert cfg.alpha == 2.0
    assert cfg.rho_list == (1.0, 2.0, 3.0, 4.0)
    assert cfg.n == 256 and cfg.r_max == 12.0
    assert cfg.kinds == ("thomas-fermi",)
    assert cfg.workers == 1
    assert cfg.config_sha256 == hashlib.sha256(path.read_bytes()).hexdigest()


def test_parse_config_defaults(tmp_path):
    path = write_config(tmp_path, command="verify")
    cfg = parse_config(path)
    assert cfg.alpha == 2.0  # verify default
    assert cfg.n == 2048
    assert cfg.r_max is None  # "auto"
    assert cfg.format == "json"


@pytest.mark.parametrize(
    "payload",
    [
        {"command": "mystery"},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "frobnicate": True},
        {"command": "solve", "alpha": 3.5, "rho": 1.0},
        {"command": "solve", "alpha": 2.0},  # rho missing
        {"command": "solve", "alpha": 2.0, "rho": -1.0},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "rho_list": [1.0]},
        {"command": "sweep", "alpha": 2.0, "rho_list": []},
        {"command": "sweep", "alpha": 2.0, "rho_list": [2.0, 1.0]},
        {"command": "sweep", "alpha": 2.0, "rho_list": [1.0, 1.0, 2.0]},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "grid": {"m": 9}},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "grid": {"n": 8}},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "grid": {"r_max": -3.0}},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "solver": {"dt": "fast"}},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "solver": {"step": 0.1}},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "format": "yaml"},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "kinds": ["tf"]},
        {"command": "solve", "alpha": 2.0, "rho": 1.0, "kinds": []},
        {"command": "sweep", "alpha": 2.0, "rho_list": [1.0], "workers": 0},
    ],
)
def test_parse_config_rejects_bad_input(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError):
        parse_config(path)


def test_parse_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        parse_config(path)


def test_parse_config_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.json")


def test_solver_settings_reach_the_dataclass(tmp_path):
    path = write_config(
        tmp_path,
        command="solve",
        alpha=2.0,
        rho=1.0,
        solver={"max_iters": 5000, "residual_tol": 1e-8},
    )
    cfg = parse_config(path)
    assert cfg.solver.max_iters == 5000
    assert cfg.solver.residual_tol == 1e-8


# ---------------------------------------------------------------------------
# exit codes


def test_main_exits_2_on_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"command": "solve", "alpha": 2.0}))
    assert main([str(path)]) == 2
    assert "rho" in capsys.readouterr().err


def test_main_exits_2_on_limits_at_alpha_one(tmp_path, capsys):
    # the two limit regimes meet at alpha = 1; there is no ladder to follow
    path = write_config(
        tmp_path,
        command="limits",
        alpha=1.0,
        rho_list=[1.0, 2.0, 3.0, 4.0],
        output_dir=str(tmp_path / "out"),
    )
    assert main([str(path)]) == 2
    assert "alpha" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# solve command


def test_solve_writes_result_and_profile(tmp_path):
    out = tmp_path / "out"
    path = tf_solve_config(tmp_path, out)
    assert main([str(path)]) == 0
    payload = json.loads((out / "solve_result.json").read_text())
    assert payload["config_sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
    assert payload["kind"] == "thomas-fermi"
    assert payload["converged"] is True
    # the multiplier is reported in the solver's own normalization; for the
    # free-boundary problem that is the (negative) level, branch rows expose
    # the minimization-frame -4*lambda instead
    assert payload["lambda"] < 0
    assert payload["report"]["E_tf"] < 0
    assert "R_support" in payload["extras"]
    header = (out / "profile.dat").read_text().split("\n")[:8]
    assert any("config_sha256" in line for line in header)


def test_solve_failure_is_reported_not_raised(tmp_path, capsys):
    out = tmp_path / "out"
    path = tf_solve_config(tmp_path, out, solver={"max_iters": 2})
    assert main([str(path)]) == 0
    err = capsys.readouterr().err
    assert "solve failed" in err
    payload = json.loads((out / "solve_result.json").read_text())
    assert payload["converged"] is False
    assert "NoConvergenceError" in payload["error"]


def test_output_dir_flag_overrides_config(tmp_path):
    out_cfg = tmp_path / "from_config"
    out_flag = tmp_path / "from_flag"
    path = tf_solve_config(tmp_path, out_cfg)
    assert main([str(path), "--output-dir", str(out_flag)]) == 0
    assert (out_flag / "solve_result.json").exists()
    assert not out_cfg.exists()


# ---------------------------------------------------------------------------
# sweep command


def test_sweep_outputs_csv_and_sidecar(tmp_path):
    out = tmp_path / "out"
    path = tf_sweep_config(tmp_path, out)
    assert main([str(path)]) == 0
    lines = (out / "branch.csv").read_text().strip().split("\n")
    assert lines[0] == "alpha,rho,m,lambda,A,B,C,kind,converged"
    assert lines[-1].startswith("# config_sha256=")
    assert len(lines) == 6  # header + 4 rows + hash comment
    sidecar = json.loads((out / "branch_sidecar.json").read_text())
    assert sidecar["n_rows"] == 4
    assert sidecar["n_converged"] == 4
    # the Thomas-Fermi branch scales exactly: m ~ rho^4, lambda ~ rho^2
    assert sidecar["fits"]["m"]["exponent"] == pytest.approx(4.0, abs=1e-6)
    assert sidecar["fits"]["lambda"]["exponent"] == pytest.approx(2.0, abs=1e-6)


def test_sweep_is_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    path = tf_sweep_config(tmp_path, out_a)
    assert main([str(path)]) == 0
    assert main([str(path), "--output-dir", str(out_b)]) == 0
    assert (out_a / "branch.csv").read_bytes() == (out_b / "branch.csv").read_bytes()


def test_sweep_workers_match_sequential(tmp_path):
    out_seq, out_par = tmp_path / "seq", tmp_path / "par"
    seq = tf_sweep_config(tmp_path, out_seq, name="seq.json")
    par = tf_sweep_config(tmp_path, out_par, name="par.json", workers=2)
    assert main([str(seq)]) == 0
    assert main([str(par)]) == 0
    rows = lambda p: (p / "branch.csv").read_text().strip().split("\n")[1:-1]
    assert rows(out_seq) == rows(out_par)


def test_sweep_short_window_reports_fit_errors(tmp_path):
    out = tmp_path / "out"
    path = tf_sweep_config(tmp_path, out, rhos=(1.0, 2.0, 3.0))
    assert main([str(path)]) == 0
    sidecar = json.loads((out / "branch_sidecar.json").read_text())
    assert "fits" not in sidecar or not sidecar.get("fits")
    assert any("m" in note for note in sidecar["fit_errors"])


# ---------------------------------------------------------------------------
# thresholds / verify commands are exercised end-to-end in the acceptance
# suite; here only the plumbing smoke level


def test_verify_suite_passes(tmp_path, capsys):
    # n=2048 is the calibrated resolution for the state-identity gates; the
    # exact checks (kernel cells, relabelings, sharp bounds) are h-independent
    out = tmp_path / "out"
    path = write_config(
        tmp_path,
        command="verify",
        alpha=2.0,
        rho=1.0,
        grid={"n": 2048, "r_max": "auto"},
        output_dir=str(out),
    )
    code = main([str(path)])
    report = json.loads((out / "verify_report.json").read_text())
    assert code == 0
    assert report["failures"] == 0
    assert all(c["status"] == "PASS" for c in report["checks"])
    assert len(report["checks"]) >= 12
    assert "PASS" in capsys.readouterr().out
