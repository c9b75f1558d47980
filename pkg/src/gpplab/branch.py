"""Branch assembly over the mass parameter: sweeps, asymptotic fits,
threshold detection and profile-convergence diagnostics.

A branch is a table of converged states indexed by rho at fixed alpha.  This
module runs the solvers along a mass ladder with warm starts and automatic
domain sizing, cross-checks every row against the closed-form
energy/Nehari/Pohozaev system, fits power laws to the asymptotic columns,
locates the existence thresholds by bisection, and serializes the result
(CSV table plus JSON sidecar).
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .energy import evaluate, solve_enp_system, threshold_constants
from .grid import (
    GppParams,
    RadialField,
    build_grid,
    project_mass,
    resample_field,
    rescale_family,
)
from .riesz import cached_kernel
from .solvers import (
    SolveResult,
    SolverConfig,
    SolverError,
    minimize_normalized,
    solve_choquard_frequency,
    solve_choquard_min,
    solve_mp_type2,
    solve_tf,
)

__all__ = [
    "BranchError",
    "InsufficientDataError",
    "SignChangeInWindowError",
    "GridMismatchError",
    "BisectionBudgetError",
    "TailUnderresolvedError",
    "BranchRow",
    "BranchCurve",
    "AsymptoticFit",
    "ThresholdReport",
    "DecayDiagnostic",
    "domain_for",
    "sweep",
    "fit_power_law",
    "limit_profile_error",
    "detect_thresholds",
    "mass_radius",
    "decay_diagnostic",
    "curve_to_csv",
    "sidecar_payload",
]

CSV_HEADER = "alpha,rho,m,lambda,A,B,C,kind,converged"

#: sweep rows must pass these before being marked converged (same thresholds
#: as the per-solve identity gates).
IDENTITY_GATE = 1e-6
ENP_GATE = 1e-5


class BranchError(RuntimeError):
    """Base class for branch-level failures."""


class InsufficientDataError(BranchError):
    """Fewer than four converged rows inside the requested fit window."""


class SignChangeInWindowError(BranchError):
    """The fitted column changes sign (or vanishes) inside the window."""


class GridMismatchError(BranchError):
    """Profiles to be compared do not live on compatible grids."""


class BisectionBudgetError(BranchError):
    """A threshold bisection exhausted its trial budget without a bracket."""


class TailUnderresolvedError(BranchError):
    """The far-field window contains no resolvable tail (compact support,
    underflow, or truncation)."""


@dataclass(frozen=True)
class BranchRow:
    rho: float
    m: float
    lam: float
    A: float
    B: float
    C: float
    kind: str
    converged: bool


@dataclass(frozen=True)
class BranchCurve:
    """Rows of one sweep, sorted by rho (strictly increasing within each kind),
    plus a provenance hash of the inputs that produced them."""

    alpha: float
    rows: tuple[BranchRow, ...]
    provenance: str

    def __post_init__(self) -> None:
        last: dict[str, float] = {}
        for row in self.rows:
            prev = last.get(row.kind)
            if prev is not None and row.rho <= prev:
                raise ValueError(
                    f"rows of kind {row.kind!r} not strictly increasing in rho "
                    f"({row.rho} after {prev})"
                )
            last[row.kind] = row.rho

    def column(self, name: str) -> np.ndarray:
        if name == "lambda":
            name = "lam"
        return np.array([getattr(r, name) for r in self.rows])

    def converged_rows(self) -> tuple[BranchRow, ...]:
        return tuple(r for r in self.rows if r.converged)


@dataclass(frozen=True)
class AsymptoticFit:
    """Least-squares power law  value = prefactor * rho**exponent  on a
    log-log window (prefactor carries the common sign of the data)."""

    exponent: float
    prefactor: float
    r_squared: float
    window: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "window": list(self.window),
        }


@dataclass(frozen=True)
class ThresholdReport:
    """Existence thresholds at fixed alpha.

    rho_star: smallest mass with strictly negative ground-state energy
    (bisection midpoint).  rho_star_critical: the critical mass from the
    fixed-frequency route (alpha = 1 only).  rho_doublestar_lower: closed-form
    lower bound bar-K_alpha below which no local minimum exists (alpha < 1
    only).  rho_doublestar_empirical: smallest swept mass at which the
    local-minimum solve succeeds (alpha < 1 only).
    """

    rho_star: float
    rho_star_critical: float | None = None
    rho_doublestar_lower: float | None = None
    rho_doublestar_empirical: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecayDiagnostic:
    """Far-field decay rate of -log(r u), compared against sqrt(lambda)."""

    slope: float
    sqrt_lambda: float
    window: tuple[float, float]
    window_ok: bool


# ---------------------------------------------------------------------------
# domain policy


def domain_for(
    alpha: float, rho: float, kind: str, lam_hint: float | None = None
) -> float:
    """Domain radius for one solve, scaled to the expected state width.

    Minimization domains track the decay length 1/sqrt(lambda) of the
    previous row when available (warm sweeps), with per-regime floors and
    ceilings calibrated against the identity gates: the alpha = 1 kernel
    loses quadrature accuracy on very wide boxes, small masses at alpha > 1
    spread like rho^(-2/(alpha-1)), and the Thomas-Fermi support is
    mass-independent.  Mountain-pass domains scale like rho^(2/(1-alpha)) so
    the rescaled mass-1 frame always lands on the same hat box.
    """
    if kind == "thomas-fermi":
        return 12.0
    if kind == "mp-type2":
        return 0.010 * rho ** (2.0 / (1.0 - alpha))
    if kind == "choquard-min":
        return 600.0
    # mass-constrained minimization
    if alpha > 1.0:
        if rho < 0.5:
            return 600.0 * rho ** (-2.0 / (alpha - 1.0))
        # the multiplier grows quickly with mass, so a hint from the previous
        # (smaller) row goes stale; the closed-form guess -- Thomas-Fermi law
        # capped by the near-Choquard rho^4 growth -- keeps pace.  The box
        # must hug the state: the Pohozaev defect grows like h^2 at fixed n.
        est = min(rho**2 / (4.0 * math.pi**2), 5e-4 * rho**4)
        lam = max(lam_hint or 0.0, est)
        return min(600.0, max(12.0, 22.0 / math.sqrt(lam)))
    if alpha == 1.0:
        if lam_hint and lam_hint > 0:
            return min(100.0, max(25.0, 10.0 / math.sqrt(lam_hint)))
        return 60.0
    # alpha < 1: narrow threshold window, sharply concentrated beyond it
    if lam_hint and lam_hint > 0:
        return min(60.0, max(12.0, 14.0 / math.sqrt(lam_hint)))
    return 60.0 if rho < 25.0 else 12.0


# ---------------------------------------------------------------------------
# sweeping


def _enp_mismatch(row_A: float, row_B: float, rho: float, alpha: float, lam: float) -> float:
    """|lambda - lambda_ENP| on the energy scale used by the identity gates."""
    _, lam_enp, C_enp = solve_enp_system(row_A, row_B, rho, alpha)
    scale = max(row_A, abs(row_B), abs(C_enp), abs(lam) * rho**2, 1e-300)
    return abs(lam - lam_enp) * rho**2 / scale


def _row_from_result(alpha: float, rho: float, res: SolveResult) -> BranchRow:
    rep = res.report
    converged = res.converged
    if res.kind == "thomas-fermi":
        # report the equivalent large-mass frequency -4m alongside the
        # Thomas-Fermi energy; both scale exactly (rho^2, rho^4).
        lam = -4.0 * res.lam
        m = rep.E_tf
    else:
        lam = res.lam
        m = rep.E_choquard if res.kind == "choquard-min" else rep.F
        if converged:
            gate = max(abs(res.residuals.nehari), abs(res.residuals.pohozaev))
            converged = gate <= IDENTITY_GATE
            if res.kind != "choquard-min":  # closed form assumes the cubic term
                enp = _enp_mismatch(rep.A, rep.B, rho, alpha, lam)
                converged = converged and enp <= ENP_GATE
    if res.collapsed:
        # the constrained infimum is zero and not attained; record that level
        m = 0.0
        lam = 0.0
        converged = False
    return BranchRow(
        rho=rho,
        m=float(m),
        lam=float(lam),
        A=float(rep.A),
        B=float(rep.B),
        C=float(rep.C),
        kind=res.kind,
        converged=bool(converged),
    )


def _failed_row(rho: float, kind: str) -> BranchRow:
    return BranchRow(rho=rho, m=0.0, lam=0.0, A=0.0, B=0.0, C=0.0, kind=kind, converged=False)


def _warm_init(state: RadialField, grid, rho: float) -> RadialField | None:
    """Previous state resampled onto the next grid, or None when cutting its
    tail at the new boundary would poison the initialization."""
    if grid.r_max < state.grid.r_max:
        vals = np.abs(state.values)
        beyond = state.grid.nodes >= grid.r_max
        if np.any(beyond) and float(np.max(vals[beyond])) > 1e-3 * float(np.max(vals)):
            return None
    return project_mass(resample_field(state, grid), rho)


def _provenance(alpha, rhos, kinds, n, cfg) -> str:
    blob = repr((alpha, tuple(rhos), tuple(sorted(kinds)), n, asdict(cfg)))
    return hashlib.sha256(blob.encode()).hexdigest()


_MIN_KINDS = {"global-min", "local-min"}
_KNOWN_KINDS = _MIN_KINDS | {"thomas-fermi", "mp-type2", "choquard-min"}


def sweep(
    alpha: float,
    rhos: Sequence[float],
    cfg: SolverConfig,
    kinds: Iterable[str] = ("global-min", "local-min"),
    n: int = 2048,
    domain_policy: Callable[[float, float, str, float | None], float] | None = None,
    provenance: str | None = None,
) -> BranchCurve:
    """Solve along a mass ladder and assemble the branch table.

    ``kinds`` selects the solvers to run at each rho: "global-min" /
    "local-min" dispatch the constrained minimizer (one row, labelled by the
    result), "thomas-fermi", "mp-type2" and "choquard-min" dispatch the
    corresponding direct solvers.  Minimization rows are warm-started from
    the previous converged state (resampled and re-projected when the domain
    changes); the domain comes from ``domain_policy`` (default
    :func:`domain_for`, fed the previous row's multiplier).

    The sweep never aborts: a solver failure or collapse yields a row with
    ``converged=False`` and the honest values that were obtained.  Converged
    rows additionally pass the Nehari/Pohozaev gate at 1e-6 and the
    closed-form multiplier cross-check at 1e-5 (Thomas-Fermi rows keep their
    own support-identity gates; their lambda column carries the equivalent
    frequency -4m).
    """
    kinds = set(kinds)
    unknown = kinds - _KNOWN_KINDS
    if unknown:
        raise ValueError(f"unknown sweep kinds: {sorted(unknown)}")
    if list(rhos) != sorted(set(rhos)):
        raise ValueError("rhos must be strictly increasing")
    policy = domain_policy or domain_for

    rows: list[BranchRow] = []
    warm: SolveResult | None = None
    lam_hint: float | None = None

    for rho in rhos:
        if kinds & _MIN_KINDS:
            r_max = policy(alpha, rho, "minimize", lam_hint)
            grid = build_grid(n, r_max)
            kernel = cached_kernel(alpha, grid)
            init = _warm_init(warm.state, grid, rho) if warm is not None else None
            fallback = "global-min" if alpha >= 1.0 else "local-min"
            params = GppParams(alpha, rho)
            try:
                res = minimize_normalized(params, kernel, cfg, init=init)
                if not res.converged and init is not None and not res.collapsed:
                    # a stale warm start can strand the flow; retry cold
                    res = minimize_normalized(params, kernel, cfg)
                rows.append(_row_from_result(alpha, rho, res))
                if res.converged:
                    warm, lam_hint = res, res.lam
            except SolverError:
                rows.append(_failed_row(rho, fallback))
        for kind in ("thomas-fermi", "choquard-min", "mp-type2"):
            if kind not in kinds:
                continue
            r_max = policy(alpha, rho, kind, None)
            grid = build_grid(n, r_max)
            kernel = cached_kernel(alpha, grid)
            try:
                if kind == "thomas-fermi":
                    res = solve_tf(alpha, kernel, cfg, rho=rho)
                elif kind == "choquard-min":
                    res = solve_choquard_min(alpha, kernel, cfg, rho=rho)
                else:
                    res = solve_mp_type2(GppParams(alpha, rho), kernel, cfg)
                rows.append(_row_from_result(alpha, rho, res))
            except SolverError:
                rows.append(_failed_row(rho, kind))

    tag = provenance or _provenance(alpha, rhos, kinds, n, cfg)
    return BranchCurve(alpha=alpha, rows=tuple(rows), provenance=tag)


# ---------------------------------------------------------------------------
# fits


def fit_power_law(
    curve: BranchCurve, column: str, window: tuple[float, float]
) -> AsymptoticFit:
    """Fit value = prefactor * rho**exponent to one column on a rho window.

    Uses only converged rows; requires at least four of them, all of one
    strict sign ("m" and "M" both read the energy column; "lambda" the
    multiplier column).
    """
    if column not in ("m", "M", "lambda"):
        raise ValueError(f"column must be 'm', 'M' or 'lambda', got {column!r}")
    attr = "lam" if column == "lambda" else "m"
    lo, hi = window
    picked = [
        (r.rho, getattr(r, attr))
        for r in curve.converged_rows()
        if lo <= r.rho <= hi
    ]
    if len(picked) < 4:
        raise InsufficientDataError(
            f"need at least 4 converged rows in window {window}, have {len(picked)}"
        )
    values = np.array([v for _, v in picked])
    if np.any(values == 0.0) or (np.min(values) < 0.0 < np.max(values)):
        raise SignChangeInWindowError(
            f"column {column!r} changes sign or vanishes in window {window}"
        )
    sign = 1.0 if values[0] > 0 else -1.0
    x = np.log([rho for rho, _ in picked])
    y = np.log(np.abs(values))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return AsymptoticFit(
        exponent=float(slope),
        prefactor=sign * math.exp(float(intercept)),
        r_squared=r2,
        window=(lo, hi),
    )


# ---------------------------------------------------------------------------
# limit profiles


def _rescaled_profile(result: SolveResult, kind: str, alpha: float | None) -> RadialField:
    rho = math.sqrt(result.report.rho2)
    if kind == "mp-type2":
        hat = result.extras.get("hat_state")
        if hat is not None:
            return hat  # already the mass-1 hat-frame profile
        kind = "choquard-large-mass"
    if kind == "tf":
        return result.state.with_values(result.state.values / rho)
    if alpha is None:
        raise ValueError(f"rescaling kind {kind!r} needs alpha")
    params = GppParams(alpha, rho, lam=result.lam)
    return rescale_family(result.state, params, kind, lam=result.lam)


def limit_profile_error(
    result: SolveResult,
    reference: SolveResult,
    kind: str,
    metric: str = "l2",
    alpha: float | None = None,
) -> float:
    """Distance between a rescaled state and its limit profile.

    ``kind`` picks the rescaling ("tf" divides by rho on the same grid;
    "mp-type2" uses the stored mass-1 hat profile; the choquard kinds and
    "lambda" apply the corresponding exact relabeling, which needs ``alpha``).
    ``metric`` is "l2", "l4" or "h1", all computed as norms of the radial
    profile difference against the line measure dr on (0, r_max).  Raises
    GridMismatchError when the rescaled state and the reference do not land
    on the same grid.
    """
    if metric not in ("l2", "l4", "h1"):
        raise ValueError(f"metric must be 'l2', 'l4' or 'h1', got {metric!r}")
    field = _rescaled_profile(result, kind, alpha)
    ref = reference.state
    g, gr = field.grid, ref.grid
    if g.n != gr.n or abs(g.r_max - gr.r_max) > 1e-9 * gr.r_max:
        raise GridMismatchError(
            f"rescaled grid (n={g.n}, r_max={g.r_max}) vs "
            f"reference (n={gr.n}, r_max={gr.r_max})"
        )
    d = field.values - ref.values
    h = gr.h
    if metric == "l2":
        return float(math.sqrt(h * np.sum(d**2)))
    if metric == "l4":
        return float((h * np.sum(d**4)) ** 0.25)
    dp = np.gradient(d, h)
    return float(math.sqrt(h * np.sum(dp**2 + d**2)))


# ---------------------------------------------------------------------------
# thresholds


def _bisect_boundary(
    classify: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float,
    budget: int,
    label: str,
) -> tuple[float, float]:
    """Shrink [lo, hi] with classify(lo) False, classify(hi) True."""
    steps = 0
    while hi - lo > tol:
        if steps >= budget:
            raise BisectionBudgetError(
                f"{label}: bracket [{lo:.6g}, {hi:.6g}] still wider than {tol:.2g} "
                f"after {budget} trials"
            )
        mid = 0.5 * (lo + hi)
        if classify(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    return lo, hi


def detect_thresholds(
    alpha: float, cfg: SolverConfig, n: int = 2048, budget: int = 24
) -> ThresholdReport:
    """Locate the existence thresholds at fixed alpha (alpha <= 1 only).

    alpha = 1: the critical mass comes from the fixed-frequency ground state;
    rho_star is then the sign change of the minimum energy, bisected with
    warm starts on lambda-adaptive domains down to a width of 1e-2 of the
    critical mass.

    alpha < 1: scans up from the closed-form bound bar-K_alpha until the
    local-minimum solve first succeeds, then bisects that boundary
    (rho_doublestar_empirical) and the energy sign change (rho_star), both
    warm-started.  Raises BisectionBudgetError when a bracket cannot be
    established within the trial budget.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(
            f"thresholds exist only for alpha in (0, 1], got {alpha} "
            "(every mass admits a ground state for alpha > 1)"
        )

    if alpha == 1.0:
        grid = build_grid(n, 25.0)
        free = solve_choquard_frequency(alpha, cached_kernel(alpha, grid), cfg)
        rho_crit = math.sqrt(free.report.rho2)

        # the m-sign classifier needs room: the decay length diverges at the
        # critical mass, and a tight box biases weakly bound states positive
        box = build_grid(n, 400.0)
        kern = cached_kernel(1.0, box)

        def negative(rho: float) -> bool:
            try:
                res = minimize_normalized(GppParams(1.0, rho), kern, cfg)
            except SolverError:
                return False
            if res.collapsed:
                return False
            if res.converged:
                return res.report.F < 0.0
            # Newton degenerates at the fold; any mass-rho point still
            # certifies an upper bound on the minimum
            f = evaluate(project_mass(res.state, rho), kern).F
            return math.isfinite(f) and f < 0.0

        hi = 1.10 * rho_crit
        if not negative(hi):
            raise BisectionBudgetError(
                f"no negative-energy state at rho = {hi:.6g} (1.1 rho_star)"
            )
        lo, hi = _bisect_boundary(
            negative, 0.97 * rho_crit, hi, 0.01 * rho_crit, budget, "rho_star"
        )
        return ThresholdReport(
            rho_star=0.5 * (lo + hi), rho_star_critical=rho_crit
        )

    consts = threshold_constants(alpha)
    bar_k = consts.barK_alpha
    grid = build_grid(n, 60.0)
    kernel = cached_kernel(alpha, grid)

    state = {"warm": None}

    def succeeds(rho: float) -> bool:
        attempts: list[RadialField | None] = [None]
        if state["warm"] is not None:
            attempts.insert(0, project_mass(state["warm"], rho))
        for init in attempts:  # warm first, cold retry on failure
            try:
                res = minimize_normalized(GppParams(alpha, rho), kernel, cfg, init=init)
            except SolverError:
                continue
            if res.converged and not res.collapsed:
                state["warm"] = res.state
                state[rho] = res.report.F
                return True
        return False

    # upward scan from the closed-form bound to a first success
    rho_hi = bar_k
    for trial in range(budget):
        if succeeds(rho_hi):
            break
        rho_hi *= 1.15
    else:
        raise BisectionBudgetError(
            f"local minimum never succeeded up to rho = {rho_hi:.6g}"
        )
    rho_lo = rho_hi / 1.15 if rho_hi > bar_k else 0.9 * bar_k
    lo, hi = _bisect_boundary(
        succeeds, rho_lo, rho_hi, 0.02 * bar_k, budget, "rho_doublestar"
    )
    rho_emp = hi  # smallest mass at which the solve is known to succeed

    def negative(rho: float) -> bool:
        return succeeds(rho) and state[rho] < 0.0

    if state[rho_emp] < 0.0:
        # energy already negative at the first existing mass
        rho_star_val = rho_emp
    else:
        lo_neg = hi_neg = rho_emp
        for trial in range(budget):
            lo_neg, hi_neg = hi_neg, 1.05 * hi_neg
            if negative(hi_neg):
                break
        else:
            raise BisectionBudgetError(
                f"no negative-energy state found up to rho = {hi_neg:.6g}"
            )
        lo_n, hi_n = _bisect_boundary(
            negative, lo_neg, hi_neg, 0.02 * bar_k, budget, "rho_star"
        )
        rho_star_val = 0.5 * (lo_n + hi_n)
    return ThresholdReport(
        rho_star=rho_star_val,
        rho_doublestar_lower=bar_k,
        rho_doublestar_empirical=rho_emp,
    )


# ---------------------------------------------------------------------------
# per-state diagnostics


def mass_radius(result: SolveResult, theta: float) -> float:
    """Smallest grid radius enclosing the fraction theta of the total mass."""
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    u = result.state
    cum = np.cumsum(u.grid.weights * u.values**2)
    idx = int(np.searchsorted(cum, theta * cum[-1]))
    return float(u.grid.nodes[min(idx, len(cum) - 1)])


def decay_diagnostic(result: SolveResult) -> DecayDiagnostic:
    """Far-field decay rate: the level of d/dr[-log(r u)] on the window
    (0.45, 0.85) r_max, which equals sqrt(lambda) for an exponentially
    decaying bound state.

    window_ok reports agreement within 25%; the slowly decaying potential at
    alpha >= 2 shifts the local rate, so there the flag simply records the
    discrepancy.  Raises TailUnderresolvedError for compact-support states
    (Thomas-Fermi) and for tails lost to underflow or truncation.
    """
    if result.kind == "thomas-fermi" or result.lam <= 0.0:
        raise TailUnderresolvedError(
            "no exponential tail to fit (compact support or lambda <= 0)"
        )
    g = result.state.grid
    u = np.abs(result.state.values)
    lo, hi = 0.45 * g.r_max, 0.85 * g.r_max
    sel = (g.nodes >= lo) & (g.nodes <= hi)
    umax = float(np.max(u))
    if np.count_nonzero(sel) < 8 or np.any(u[sel] <= 1e-13 * umax):
        raise TailUnderresolvedError(
            f"tail not resolvable on ({lo:.3g}, {hi:.3g}): "
            "values at or below the noise floor"
        )
    y = -np.log(g.nodes[sel] * u[sel])
    rate = np.gradient(y, g.h)
    slope = float(np.median(rate))
    root = math.sqrt(result.lam)
    return DecayDiagnostic(
        slope=slope,
        sqrt_lambda=root,
        window=(lo, hi),
        window_ok=abs(slope - root) <= 0.25 * root,
    )


# ---------------------------------------------------------------------------
# serialization


def curve_to_csv(curve: BranchCurve) -> str:
    """CSV table of the curve (header alpha,rho,m,lambda,A,B,C,kind,converged)."""
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in curve.rows:
        out.write(
            f"{curve.alpha:.17g},{r.rho:.17g},{r.m:.17g},{r.lam:.17g},"
            f"{r.A:.17g},{r.B:.17g},{r.C:.17g},{r.kind},{str(r.converged).lower()}\n"
        )
    return out.getvalue()


def sidecar_payload(
    curve: BranchCurve,
    fits: dict[str, AsymptoticFit] | None = None,
    thresholds: ThresholdReport | None = None,
) -> dict:
    """JSON-ready sidecar: provenance plus any fits and thresholds."""
    payload: dict = {
        "alpha": curve.alpha,
        "provenance": curve.provenance,
        "n_rows": len(curve.rows),
        "n_converged": int(sum(bool(r.converged) for r in curve.rows)),
    }
    if fits:
        payload["fits"] = {k: f.to_dict() for k, f in fits.items()}
    if thresholds is not None:
        payload["thresholds"] = thresholds.to_dict()
    return payload
