"""Batch front door: declarative run configs, subcommands, reproducible
outputs.

One JSON config file drives everything:

    {"command": "sweep", "alpha": 2.0, "rho_list": [5, 10, 20],
     "grid": {"n": 2048, "r_max": "auto"}, "solver": {"residual_tol": 1e-6},
     "output_dir": "out", "format": "csv"}

Commands: solve (one state -> result JSON + profile dump), sweep (branch
CSV + fits sidecar), limits (limit-profile error table along a mass ladder),
thresholds (ThresholdReport JSON), verify (identity/property suite; nonzero
exit on any violation).  Outputs are deterministic -- no timestamps -- and
every file embeds the sha256 of the config that produced it.  Exit codes:
0 success, 1 verify failures, 2 bad config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import branch
from .branch import (
    BranchError,
    curve_to_csv,
    detect_thresholds,
    domain_for,
    fit_power_law,
    limit_profile_error,
    mass_radius,
    sidecar_payload,
    sweep,
)
from .energy import evaluate, identity_residuals, solve_enp_system
from .grid import (
    GppParams,
    RadialField,
    build_grid,
    dilate,
    dirichlet_energy,
    dump_field,
    l2_norm,
    l4_norm4,
    lp_norm,
    rescale_family,
)
from .riesz import (
    C_STAR,
    build_kernel,
    cached_kernel,
    constants,
    interaction_bilinear,
    interaction_energy,
)
from .solvers import (
    SolverConfig,
    SolverError,
    minimize_normalized,
    solve_choquard_min,
    solve_choquard_mp,
    solve_mp_type2,
    solve_tf,
)

__all__ = ["RunConfig", "ConfigError", "parse_config", "run", "main"]


class ConfigError(ValueError):
    """Malformed run configuration (exit code 2)."""


_COMMANDS = ("solve", "sweep", "limits", "thresholds", "verify")
_TOP_KEYS = {
    "command",
    "alpha",
    "rho",
    "rho_list",
    "grid",
    "solver",
    "output_dir",
    "format",
    "kinds",
    "workers",
}
_SOLVE_KINDS = {
    "global-min",
    "local-min",
    "thomas-fermi",
    "mp-type2",
    "choquard-min",
    "choquard-mp",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha: float
    rho: float | None
    rho_list: tuple[float, ...] | None
    n: int
    r_max: float | None  # None means automatic domain sizing
    solver: SolverConfig
    output_dir: str
    format: str
    kinds: tuple[str, ...]
    workers: int
    config_sha256: str


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON run config; unknown keys are rejected."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    sha = hashlib.sha256(blob).hexdigest()
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "config must be a JSON object")

    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    command = raw.get("command")
    _require(command in _COMMANDS, f"command must be one of {_COMMANDS}, got {command!r}")

    alpha = raw.get("alpha", 2.0 if command == "verify" else None)
    _require(
        isinstance(alpha, (int, float)) and 0.0 < float(alpha) < 3.0,
        "alpha must be a real in (0, 3)",
    )
    alpha = float(alpha)

    rho = raw.get("rho")
    rho_list = raw.get("rho_list")
    _require(rho is None or rho_list is None, "give rho or rho_list, not both")
    if command == "solve":
        _require(isinstance(rho, (int, float)) and rho > 0, "solve needs a positive rho")
    if command in ("sweep", "limits"):
        _require(
            isinstance(rho_list, list)
            and len(rho_list) > 0
            and all(isinstance(x, (int, float)) and x > 0 for x in rho_list)
            and list(rho_list) == sorted(set(rho_list)),
            f"{command} needs rho_list: a strictly increasing list of positive reals",
        )
    rho = float(rho) if rho is not None else None
    rhos = tuple(float(x) for x in rho_list) if rho_list is not None else None

    grid_raw = raw.get("grid", {})
    _require(isinstance(grid_raw, dict), "grid must be an object")
    unknown = set(grid_raw) - {"n", "r_max"}
    _require(not unknown, f"unknown grid keys: {sorted(unknown)}")
    n = grid_raw.get("n", 2048)
    _require(isinstance(n, int) and n >= 16, "grid.n must be an integer >= 16")
    r_max_raw = grid_raw.get("r_max", "auto")
    if r_max_raw == "auto":
        r_max = None
    else:
        _require(
            isinstance(r_max_raw, (int, float)) and r_max_raw > 0,
            'grid.r_max must be positive or "auto"',
        )
        r_max = float(r_max_raw)

    solver_raw = raw.get("solver", {})
    _require(isinstance(solver_raw, dict), "solver must be an object")
    allowed = {f.name for f in dataclass_fields(SolverConfig)}
    unknown = set(solver_raw) - allowed
    _require(not unknown, f"unknown solver keys: {sorted(unknown)}")
    bad = [k for k, v in solver_raw.items() if not isinstance(v, (int, float))]
    _require(not bad, f"solver settings must be numeric: {sorted(bad)}")
    try:
        solver = SolverConfig(**solver_raw)
    except TypeError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc

    fmt = raw.get("format", "json")
    _require(fmt in ("csv", "json"), 'format must be "csv" or "json"')

    kinds_raw = raw.get("kinds")
    if kinds_raw is None:
        kinds = ("global-min", "local-min") if command != "solve" else ("global-min",)
    else:
        _require(
            isinstance(kinds_raw, list) and kinds_raw and
            all(k in _SOLVE_KINDS for k in kinds_raw),
            f"kinds must be a non-empty list drawn from {sorted(_SOLVE_KINDS)}",
        )
        kinds = tuple(kinds_raw)

    workers = raw.get("workers", 1)
    _require(isinstance(workers, int) and workers >= 1, "workers must be an integer >= 1")

    return RunConfig(
        command=command,
        alpha=alpha,
        rho=rho,
        rho_list=rhos,
        n=n,
        r_max=r_max,
        solver=solver,
        output_dir=str(raw.get("output_dir", ".")),
        format=fmt,
        kinds=kinds,
        workers=workers,
        config_sha256=sha,
    )


# ---------------------------------------------------------------------------
# command implementations


def _grid_for(cfg: RunConfig, rho: float, kind: str):
    r_max = cfg.r_max if cfg.r_max is not None else domain_for(cfg.alpha, rho, kind)
    return build_grid(cfg.n, r_max)


def _json_dump(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _solve_one(cfg: RunConfig, rho: float, kind: str):
    want_min = kind in ("global-min", "local-min")
    domain_kind = kind
    if want_min:
        domain_kind = "minimize"
    elif kind == "choquard-mp":
        domain_kind = "mp-type2"  # the hat frame lives on the mass-1 box
        rho = 1.0
    grid = _grid_for(cfg, rho, domain_kind)
    kernel = cached_kernel(cfg.alpha, grid)
    if want_min:
        return minimize_normalized(GppParams(cfg.alpha, rho), kernel, cfg.solver)
    if kind == "thomas-fermi":
        return solve_tf(cfg.alpha, kernel, cfg.solver, rho=rho)
    if kind == "choquard-min":
        return solve_choquard_min(cfg.alpha, kernel, cfg.solver, rho=rho)
    if kind == "choquard-mp":
        return solve_choquard_mp(cfg.alpha, kernel, cfg.solver)
    return solve_mp_type2(GppParams(cfg.alpha, rho), kernel, cfg.solver)


def _cmd_solve(cfg: RunConfig, out: Path, verbose: bool) -> int:
    kind = cfg.kinds[0]
    try:
        res = _solve_one(cfg, cfg.rho, kind)
    except SolverError as exc:
        _json_dump(
            {
                "config_sha256": cfg.config_sha256,
                "alpha": cfg.alpha,
                "rho": cfg.rho,
                "converged": False,
                "error": f"{type(exc).__name__}: {exc}",
            },
            out / "solve_result.json",
        )
        print(f"solve failed: {exc}", file=sys.stderr)
        return 0
    scalar_extras = {
        k: float(v) for k, v in res.extras.items() if isinstance(v, (int, float))
    }
    payload = {
        "config_sha256": cfg.config_sha256,
        "alpha": cfg.alpha,
        "rho": cfg.rho,
        "grid": {"n": res.state.grid.n, "r_max": res.state.grid.r_max},
        "kind": res.kind,
        "converged": bool(res.converged),
        "collapsed": bool(res.collapsed),
        "iterations": int(res.iterations),
        "lambda": float(res.lam),
        "report": {k: float(v) for k, v in res.report.to_dict().items()},
        "residuals": {k: float(v) for k, v in asdict(res.residuals).items()},
        "extras": scalar_extras,
    }
    _json_dump(payload, out / "solve_result.json")
    dump_field(
        res.state,
        out / "profile.dat",
        alpha=cfg.alpha,
        rho=cfg.rho,
        extra_header={"config_sha256": cfg.config_sha256, "kind": res.kind},
    )
    if verbose:
        print(f"solved {kind} at rho={cfg.rho}: F={res.report.F:.6e}", file=sys.stderr)
    return 0


def _run_sweep(cfg: RunConfig):
    policy = None
    if cfg.r_max is not None:
        fixed = cfg.r_max
        policy = lambda a, r, k, l=None: fixed  # noqa: E731
    warm_free = not (set(cfg.kinds) & {"global-min", "local-min"})
    if cfg.workers > 1 and warm_free and len(cfg.rho_list) > 1:
        # rows are independent for the direct solvers; split the ladder
        from concurrent.futures import ThreadPoolExecutor

        chunks = [list(cfg.rho_list[i :: cfg.workers]) for i in range(cfg.workers)]
        chunks = [c for c in chunks if c]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(
                pool.map(
                    lambda c: sweep(
                        cfg.alpha, c, cfg.solver, kinds=cfg.kinds, n=cfg.n,
                        domain_policy=policy, provenance=cfg.config_sha256,
                    ),
                    chunks,
                )
            )
        rows = sorted(
            (r for part in parts for r in part.rows), key=lambda r: (r.rho, r.kind)
        )
        return branch.BranchCurve(cfg.alpha, tuple(rows), cfg.config_sha256)
    return sweep(
        cfg.alpha, list(cfg.rho_list), cfg.solver, kinds=cfg.kinds, n=cfg.n,
        domain_policy=policy, provenance=cfg.config_sha256,
    )


def _cmd_sweep(cfg: RunConfig, out: Path, verbose: bool) -> int:
    curve = _run_sweep(cfg)
    csv_text = curve_to_csv(curve) + f"# config_sha256={cfg.config_sha256}\n"
    (out / "branch.csv").write_text(csv_text)
    fits = {}
    notes = {}
    window = (min(cfg.rho_list), max(cfg.rho_list))
    for column in ("m", "lambda"):
        try:
            fits[column] = fit_power_law(curve, column, window)
        except BranchError as exc:
            notes[column] = f"{type(exc).__name__}: {exc}"
    payload = sidecar_payload(curve, fits=fits)
    payload["config_sha256"] = cfg.config_sha256
    if notes:
        payload["fit_errors"] = notes
    _json_dump(payload, out / "branch_sidecar.json")
    if verbose:
        conv = sum(r.converged for r in curve.rows)
        print(f"sweep: {conv}/{len(curve.rows)} rows converged", file=sys.stderr)
    return 0


def _cmd_limits(cfg: RunConfig, out: Path, verbose: bool) -> int:
    if cfg.alpha > 1.0:
        kind, metric = "tf", "l2"
        grid = build_grid(cfg.n, cfg.r_max if cfg.r_max is not None else 18.0)
        kernel = cached_kernel(cfg.alpha, grid)
        reference = solve_tf(cfg.alpha, kernel, cfg.solver)

        def solve_at(rho):
            return minimize_normalized(GppParams(cfg.alpha, rho), kernel, cfg.solver)

    elif cfg.alpha < 1.0:
        kind, metric = "mp-type2", "h1"
        ref_grid = build_grid(cfg.n, domain_for(cfg.alpha, 1.0, "mp-type2"))
        reference = solve_choquard_mp(cfg.alpha, cached_kernel(cfg.alpha, ref_grid), cfg.solver)

        def solve_at(rho):
            g = _grid_for(cfg, rho, "mp-type2")
            return solve_mp_type2(GppParams(cfg.alpha, rho), cached_kernel(cfg.alpha, g), cfg.solver)

    else:
        raise ConfigError("limits needs alpha != 1 (no canonical limit profile at alpha = 1)")

    rows = []
    for rho in cfg.rho_list:
        try:
            res = solve_at(rho)
            err = limit_profile_error(res, reference, kind, metric, alpha=cfg.alpha)
            rows.append({"rho": rho, "error": float(err), "converged": bool(res.converged)})
        except (SolverError, BranchError) as exc:
            rows.append({"rho": rho, "error": None, "converged": False,
                         "note": f"{type(exc).__name__}: {exc}"})
        if verbose:
            print(f"limits: rho={rho} -> {rows[-1]}", file=sys.stderr)

    if cfg.format == "csv":
        lines = ["rho,error,converged"]
        for r in rows:
            err = "" if r["error"] is None else f"{r['error']:.17g}"
            lines.append(f"{r['rho']:.17g},{err},{str(r['converged']).lower()}")
        lines.append(f"# config_sha256={cfg.config_sha256}")
        (out / "limits.csv").write_text("\n".join(lines) + "\n")
    else:
        _json_dump(
            {"config_sha256": cfg.config_sha256, "kind": kind, "metric": metric,
             "rows": rows},
            out / "limits.json",
        )
    return 0


def _cmd_thresholds(cfg: RunConfig, out: Path, verbose: bool) -> int:
    try:
        report = detect_thresholds(cfg.alpha, cfg.solver, n=cfg.n)
        payload = {"config_sha256": cfg.config_sha256, "alpha": cfg.alpha}
        payload.update(report.to_dict())
    except (BranchError, SolverError, ValueError) as exc:
        payload = {
            "config_sha256": cfg.config_sha256,
            "alpha": cfg.alpha,
            "error": f"{type(exc).__name__}: {exc}",
        }
        print(f"thresholds failed: {exc}", file=sys.stderr)
    _json_dump(payload, out / "thresholds.json")
    return 0


# ---------------------------------------------------------------------------
# verify


def _newtonian_cell_integrals(grid) -> np.ndarray:
    """Exact integral of s^2 / max(r_i, s) over each cell, independently of
    the kernel assembly (elementary antiderivatives, split at s = r_i)."""
    r = grid.nodes[:, None]
    edges = grid.h * np.arange(grid.n + 1)
    lo, hi = edges[None, :-1], edges[None, 1:]
    below = (hi**3 - lo**3) / (3.0 * r)  # cell entirely inside s < r
    above = 0.5 * (hi**2 - lo**2)  # cell entirely outside
    straddle = (r**3 - lo**3) / (3.0 * r) + 0.5 * (hi**2 - r**2)
    out = np.where(hi <= r, below, np.where(lo >= r, above, straddle))
    return out


def _verify_checks(cfg: RunConfig, verbose: bool):
    """Yield (name, residual, gate) triples for the identity suite."""
    rng = np.random.default_rng(7)
    alpha = cfg.alpha

    # r_max/n chosen so the unit sphere is a cell edge: the uniform-ball
    # potential is then exact, not just second order.
    grid = build_grid(512, 8.0)
    kern2 = build_kernel(2.0, grid)
    exact = _newtonian_cell_integrals(grid)
    yield (
        "newtonian-kernel-cells",
        float(np.max(np.abs(kern2.matrix - exact)) / np.max(exact)),
        1e-10,
    )

    r = grid.nodes
    ball = np.where(r <= 1.0, 1.0, 0.0)
    phi = kern2.matrix @ ball
    want = np.where(r <= 1.0, 0.5 * (1.0 - r**2 / 3.0), 1.0 / (3.0 * r))
    yield ("ball-potential", float(np.max(np.abs(phi - want) / want)), 1e-10)

    tf_grid = build_grid(cfg.n, 12.0)
    tf = solve_tf(2.0, cached_kernel(2.0, tf_grid), cfg.solver)
    m1 = tf.report.E_tf
    yield ("tf-energy-constant", abs(m1 + 1.0 / (16 * math.pi**2)) * 16 * math.pi**2, 1e-3)
    yield ("tf-moment-identities", abs(tf.residuals.pohozaev), 1e-3)
    yield ("tf-support-radius", abs(mass_radius(tf, 1.0 - 1e-12) - math.pi) / math.pi, 1e-2)

    u = RadialField(grid, np.exp(-grid.nodes**2) * (1 + 0.3 * np.sin(grid.nodes)))
    kern = build_kernel(alpha, grid)
    t = 1.7
    rep = evaluate(u, kern)
    rep_t = evaluate(dilate(u, t), kern)
    worst = max(
        abs(rep_t.A - t**2 * rep.A) / (t**2 * rep.A),
        abs(rep_t.B - t**3 * rep.B) / (t**3 * rep.B),
        abs(rep_t.C - t ** (3.0 - alpha) * rep.C) / (t ** (3.0 - alpha) * rep.C),
        abs(rep_t.rho2 - rep.rho2) / rep.rho2,
    )
    # interpolation-based, so only good to discretization accuracy; the sharp
    # statement is the grid-relabeling check below
    yield ("dilation-scaling-laws", worst, 1e-3)

    lam = 2.6
    v = rescale_family(u, GppParams(alpha, l2_norm(u), lam), "lambda")
    rep_v = evaluate(v, build_kernel(alpha, v.grid))
    worst = max(
        abs(rep_v.A - rep.A / lam) * lam / rep.A,
        abs(rep_v.B - rep.B * lam**-1.5) * lam**1.5 / rep.B,
        abs(rep_v.C - rep.C * lam ** (0.5 * (alpha - 3.0)))
        * lam ** (0.5 * (3.0 - alpha)) / rep.C,
        abs(rep_v.rho2 - rep.rho2) / rep.rho2,
    )
    yield ("rescaling-homogeneity", worst, 1e-12)

    f = RadialField(grid, rng.standard_normal(grid.n))
    g = RadialField(grid, rng.standard_normal(grid.n))
    bfg = interaction_bilinear(kern, f, g)
    scale = max(abs(bfg), 1e-300)
    swap = abs(bfg - interaction_bilinear(kern, g, f)) / scale
    fp = interaction_bilinear(kern, f.with_values(f.values + g.values),
                              f.with_values(f.values + g.values))
    fm = interaction_bilinear(kern, f.with_values(f.values - g.values),
                              f.with_values(f.values - g.values))
    polar = abs(0.25 * (fp - fm) - bfg) / scale
    yield ("riesz-bilinear-symmetry", max(swap, polar), 1e-11)

    c_hls = constants(alpha).c_alpha_hls
    p = 12.0 / (3.0 + alpha)
    worst_hls = -math.inf
    worst_gn = -math.inf
    for _ in range(50):
        width = float(rng.uniform(0.3, 2.0))
        vals = np.exp(-((grid.nodes / width) ** 2)) * (
            1.0 + 0.5 * rng.uniform(-1.0, 1.0) * np.cos(grid.nodes)
        )
        uu = RadialField(grid, vals)
        d = interaction_energy(kern, uu)
        worst_hls = max(worst_hls, (d - c_hls * lp_norm(uu, p) ** 4) / d)
        b = l4_norm4(uu)
        gn = C_STAR * l2_norm(uu) * dirichlet_energy(uu) ** 1.5
        worst_gn = max(worst_gn, (b - gn) / b)
    yield ("hls-sharp-bound-50-fields", worst_hls, 0.0)
    yield ("gn-sharp-bound-50-fields", worst_gn, 0.0)

    rho = cfg.rho if cfg.rho is not None else 1.0
    sgrid = _grid_for(cfg, rho, "minimize")
    skern = cached_kernel(alpha, sgrid)
    res = minimize_normalized(GppParams(alpha, rho), skern, cfg.solver)
    ids = identity_residuals(res.state, res.lam, skern)
    yield ("state-nehari", abs(ids.nehari), 1e-6)
    yield ("state-pohozaev", abs(ids.pohozaev), 1e-6)
    _, lam_enp, _ = solve_enp_system(res.report.A, res.report.B, rho, alpha)
    lams = (res.lam, res.report.lambda_nehari, lam_enp)
    yield ("state-lambda-triple", (max(lams) - min(lams)) / abs(res.lam), 1e-5)


def _cmd_verify(cfg: RunConfig, out: Path, verbose: bool) -> int:
    lines = []
    failures = 0
    for name, residual, gate in _verify_checks(cfg, verbose):
        ok = residual <= gate
        failures += not ok
        lines.append(
            {"check": name, "residual": residual, "gate": gate,
             "status": "PASS" if ok else "FAIL"}
        )
        print(f"{'PASS' if ok else 'FAIL'}  {name}: residual={residual:.3e} gate={gate:.0e}")
    _json_dump(
        {"config_sha256": cfg.config_sha256, "alpha": cfg.alpha,
         "failures": failures, "checks": lines},
        out / "verify_report.json",
    )
    return 1 if failures else 0


# ---------------------------------------------------------------------------


def run(cfg: RunConfig, output_dir: str | None = None, verbose: bool = False) -> int:
    """Execute one parsed config; returns the process exit code."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dispatch = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "limits": _cmd_limits,
        "thresholds": _cmd_thresholds,
        "verify": _cmd_verify,
    }
    return dispatch[cfg.command](cfg, out, verbose)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gpplab",
        description="Radial solver lab for the defocusing Gross-Pitaevskii-"
        "Poisson equation: solve, sweep, limits, thresholds, verify.",
    )
    parser.add_argument("config", help="path to a JSON run config")
    parser.add_argument("--output-dir", default=None, help="override config output_dir")
    parser.add_argument("--verbose", action="store_true", help="progress on stderr")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg, output_dir=args.output_dir, verbose=args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
