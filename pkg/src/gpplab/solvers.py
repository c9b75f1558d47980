"""Iterative solvers for the normalized states of the equation

    -Delta u + lambda u + u^3 = (I_alpha * u^2) u,   |u|_2 = rho,

and for its three limit problems: the Choquard equation (cubic term absent),
the Thomas-Fermi free-boundary problem (gradient term absent), and the
fixed-frequency Choquard equation (mass unconstrained).

The workhorse is a normalized gradient flow: a semi-implicit step that treats
the Laplacian implicitly in the v = r u variable and the nonlinear terms
explicitly, followed by absolute value (energy never increases under |u|) and
mass re-projection, with step halving to enforce monotone energy decrease.
Converged flows are polished by a bordered Newton iteration on the full
stationarity system in (u, lambda), which also handles the saddle points of
the mountain-pass routines.

Extreme-mass regimes are solved in a rescaled frame.  For alpha != 1 the
substitution u(x) = a w(b x) with b = rho^{2/(alpha-1)}, a = rho b^{3/2}
turns the mass-rho problem into a mass-1 problem with cubic coefficient
theta = b^alpha = rho^{2 alpha/(alpha-1)} and interaction coefficient 1; all
scalars map back by exact powers of rho, and the state maps back by pure
relabeling of the same grid indices (no interpolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .energy import (
    EnergyReport,
    IdentityResiduals,
    evaluate,
    fiber_profile,
    identity_residuals,
    threshold_constants,
)
from .grid import (
    GppParams,
    RadialField,
    RadialGrid,
    build_grid,
    neg_laplacian,
    neg_laplacian_v_bands,
    project_mass,
    resample_field,
)
from .riesz import RieszKernel, cached_kernel

# Domain for the frequency-1 Choquard solves (decay e^{-r}, width O(1) for
# every alpha); profiles at other normalizations are rescaled from it.
_FREE_CHOQUARD_R_MAX = 30.0

__all__ = [
    "SolverConfig",
    "SolveResult",
    "SolverError",
    "NoConvergenceError",
    "LeftAdmissibleConeError",
    "BisectionFailureError",
    "minimize_normalized",
    "solve_mp_type2",
    "solve_choquard_min",
    "solve_choquard_frequency",
    "solve_choquard_mp",
    "solve_tf",
    "choquard_quotient",
    "gaussian_seed",
]


class SolverError(RuntimeError):
    """Base class for solver failures."""


class NoConvergenceError(SolverError):
    """Iteration budget exhausted without meeting the residual target."""


class LeftAdmissibleConeError(SolverError):
    """Mountain-pass iterate left the admissible dilation cone."""


class BisectionFailureError(SolverError):
    """Scalar bisection lost its bracket (Thomas-Fermi multiplier)."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers.

    dt is the initial flow step (adapted automatically), damping the
    Thomas-Fermi relaxation factor, H_fraction the fraction of the cone
    bound used for mountain-pass admissibility, seed_width the width of the
    Gaussian initial datum.
    """

    dt: float = 0.1
    max_iters: int = 20000
    residual_tol: float = 1e-6
    damping: float = 0.5
    H_fraction: float = 0.9
    seed_width: float = 1.5


@dataclass(frozen=True)
class SolveResult:
    state: RadialField
    lam: float
    report: EnergyReport
    residuals: IdentityResiduals
    kind: str
    iterations: int
    converged: bool
    collapsed: bool = False
    extras: dict = field(default_factory=dict)


def gaussian_seed(grid: RadialGrid, rho: float, width: float) -> RadialField:
    vals = np.exp(-0.5 * (grid.nodes / width) ** 2)
    return project_mass(RadialField(grid, vals), rho)


def _auto_seed(
    kernel: RieszKernel, rho: float, theta: float, cfg: SolverConfig
) -> RadialField:
    """Gaussian seed whose width minimizes the energy over a coarse scan.

    The energy landscape can prefer widths orders of magnitude away from any
    fixed default (the weak-binding regimes are very wide), so a one-time
    scan is much cheaper than flowing across scales."""
    grid = kernel.grid
    widths = np.geomspace(4.0 * grid.h, grid.r_max / 4.0, 28)
    widths = np.append(widths, cfg.seed_width)
    best, best_f = None, math.inf
    for width in widths:
        u = gaussian_seed(grid, rho, width)
        f = _theta_energy(evaluate(u, kernel), theta)
        if f < best_f:
            best, best_f = u, f
    return best


# ---------------------------------------------------------------------------
# shared low-level machinery


def _theta_energy(rep: EnergyReport, theta: float) -> float:
    return 0.5 * rep.A + 0.25 * theta * rep.B - 0.25 * rep.C


def _nehari_lambda(rep: EnergyReport, theta: float) -> float:
    return (rep.C - rep.A - theta * rep.B) / rep.rho2


_DENSE_LAP_CACHE: dict[tuple[int, float], np.ndarray] = {}


def _dense_neg_laplacian(grid: RadialGrid) -> np.ndarray:
    """Dense matrix of u -> -Delta u (via v = r u), for Newton Jacobians."""
    key = (grid.n, grid.r_max)
    hit = _DENSE_LAP_CACHE.get(key)
    if hit is not None:
        return hit
    n = grid.n
    ab = neg_laplacian_v_bands(grid)
    lv = np.zeros((n, n))
    idx = np.arange(n)
    lv[idx, idx] = ab[2]
    lv[idx[:-1], idx[:-1] + 1] = ab[1, 1:]
    lv[idx[:-1] + 1, idx[:-1]] = ab[3, :-1]
    lv[idx[:-2], idx[:-2] + 2] = ab[0, 2:]
    lv[idx[:-2] + 2, idx[:-2]] = ab[4, :-2]
    r = grid.nodes
    lu = lv * (r[None, :] / r[:, None])
    if len(_DENSE_LAP_CACHE) >= 4:
        _DENSE_LAP_CACHE.pop(next(iter(_DENSE_LAP_CACHE)))
    _DENSE_LAP_CACHE[key] = lu
    return lu


def _el_sup_scale(u: np.ndarray, lam: float, theta: float, kernel: RieszKernel) -> float:
    """Pointwise magnitude scale of the equation's terms (for relative sups)."""
    phi = kernel.matrix @ u**2
    return float(
        np.max(np.abs(lam * u)) + np.max(np.abs(theta * u**3)) + np.max(np.abs(phi * u))
    )


def _el_residual_field(
    u: RadialField, lam: float, theta: float, kernel: RieszKernel
) -> np.ndarray:
    phi = kernel.matrix @ u.values**2
    return neg_laplacian(u) + (lam + theta * u.values**2 - phi) * u.values


def _looks_collapsed(rep: EnergyReport, theta: float, rho: float, u: RadialField) -> bool:
    """Vanishing-gradient detection: the flow has spread to the domain scale
    with energy pinned at zero from above (no bound state at this mass)."""
    grid = u.grid
    box_a = rho**2 * math.pi**2 / grid.r_max**2
    if rep.A > 8.0 * box_a:
        return False
    f = _theta_energy(rep, theta)
    if f < -1e-9 * max(rep.A, theta * rep.B, rep.C):
        return False
    outer = grid.nodes > 0.5 * grid.r_max
    outer_mass = float(grid.weights[outer] @ u.values[outer] ** 2)
    return outer_mass > 0.2 * rho**2


class _Flow:
    """Semi-implicit normalized gradient flow at fixed mass.

    Minimizes A/2 + theta B/4 - C/4 over the mass sphere |u|_2 = rho.
    """

    def __init__(self, kernel: RieszKernel, rho: float, theta: float, cfg: SolverConfig):
        self.kernel = kernel
        self.grid = kernel.grid
        self.rho = rho
        self.theta = theta
        self.cfg = cfg
        self.bands = neg_laplacian_v_bands(self.grid)
        self._ab_dt = None
        self._ab = None

    def _ab_for(self, dt: float) -> np.ndarray:
        if dt != self._ab_dt:
            ab = dt * self.bands
            ab[2] += 1.0
            self._ab, self._ab_dt = ab, dt
        return self._ab

    def step(self, u: RadialField, dt: float) -> RadialField:
        r = self.grid.nodes
        vals = u.values
        phi = self.kernel.matrix @ vals**2
        nonlin = self.theta * vals**3 - phi * vals
        rhs = r * (vals - dt * nonlin)
        v = solve_banded((2, 2), self._ab_for(dt), rhs)
        return project_mass(RadialField(self.grid, np.abs(v / r)), self.rho)

    def run(self, u0: RadialField, detect_collapse: bool = False):
        """Returns (u, iters, collapsed)."""
        cfg = self.cfg
        u = project_mass(u0, self.rho)
        rep = evaluate(u, self.kernel)
        f = _theta_energy(rep, self.theta)
        dt = cfg.dt
        dt_floor = cfg.dt * 2.0**-40
        dt_ceil = cfg.dt * 512.0
        check_every = 25
        f_at_last_check = f
        rel_at_last_check = math.inf
        it = 0
        collapsed = False
        while it < cfg.max_iters:
            it += 1
            u_new = self.step(u, dt)
            rep_new = evaluate(u_new, self.kernel)
            f_new = _theta_energy(rep_new, self.theta)
            if f_new <= f + 1e-13 * max(abs(f), 1e-300):
                u, rep, f = u_new, rep_new, f_new
                dt = min(dt * 1.3, dt_ceil)
            else:
                dt *= 0.5
                if dt < dt_floor:
                    break  # descent stalled at rounding level
                continue
            if it % check_every == 0:
                if detect_collapse and _looks_collapsed(rep, self.theta, self.rho, u):
                    collapsed = True
                    break
                lam = _nehari_lambda(rep, self.theta)
                g = _el_residual_field(u, lam, self.theta, self.kernel)
                rel = float(np.max(np.abs(g))) / _el_sup_scale(
                    u.values, lam, self.theta, self.kernel
                )
                df = abs(f - f_at_last_check)
                scale = max(rep.A, self.theta * rep.B, rep.C, 1e-300)
                # hand off to Newton once the residual is small, progress has
                # stalled, or the energy has flattened out
                if (
                    rel <= 1e-3
                    or (rel < 0.05 and rel > 0.9 * rel_at_last_check)
                    or df <= 1e-12 * scale
                ):
                    break
                f_at_last_check = f
                rel_at_last_check = rel
        return u, it, collapsed


def _newton_constrained(
    kernel: RieszKernel,
    u: RadialField,
    lam: float,
    rho: float,
    theta: float,
    max_steps: int = 12,
):
    """Bordered Newton on the stationarity system

        -Delta u + lam u + theta u^3 - (I_alpha*u^2) u = 0,   |u|_2^2 = rho^2,

    solving for (u, lam) jointly.  Works at minima and saddles alike.
    Returns (u, lam, steps, achieved_sup_rel).
    """
    grid = kernel.grid
    n = grid.n
    w = grid.weights
    m = kernel.matrix
    lu = _dense_neg_laplacian(grid)
    x = u.values.copy()

    def residual(xv, lv):
        phi = m @ xv**2
        g = lu @ xv + lv * xv + theta * xv**3 - phi * xv
        return g, phi

    g, phi = residual(x, lam)
    scale = _el_sup_scale(x, lam, theta, kernel)
    best = float(np.max(np.abs(g))) / scale
    steps = 0
    for steps in range(1, max_steps + 1):
        mass_def = w @ x**2 - rho**2
        jac = np.empty((n + 1, n + 1))
        core = lu - (2.0 * x[:, None]) * m * x[None, :]
        core[np.arange(n), np.arange(n)] += lam + 3.0 * theta * x**2 - phi
        jac[:n, :n] = core
        jac[:n, n] = x
        jac[n, :n] = 2.0 * w * x
        jac[n, n] = 0.0
        rhs = np.empty(n + 1)
        rhs[:n] = -g
        rhs[n] = -mass_def
        # row equilibration: the PDE rows scale like lam * max|u| while the
        # mass row scales like h * max|u|, a spread that can reach ~1e12 for
        # concentrated profiles and stalls the raw solve near 1e-7 relative
        row_sup = np.max(np.abs(jac), axis=1)
        row_sup[row_sup == 0.0] = 1.0
        jac /= row_sup[:, None]
        rhs /= row_sup
        try:
            delta = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        t = 1.0
        improved = False
        for _ in range(6):
            x_try = x + t * delta[:n]
            lam_try = lam + t * delta[n]
            g_try, phi_try = residual(x_try, lam_try)
            sup_try = float(np.max(np.abs(g_try))) / _el_sup_scale(
                x_try, lam_try, theta, kernel
            )
            if sup_try < best:
                x, lam, g, phi = x_try, lam_try, g_try, phi_try
                best = sup_try
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        if best < 1e-13:
            break
    return RadialField(grid, x), lam, steps, best


# ---------------------------------------------------------------------------
# frame handling for the rescaled regimes


@dataclass(frozen=True)
class _Frame:
    """Mass-1 rescaled frame for alpha != 1: u(x) = amp * w(b x)."""

    alpha: float
    rho: float
    b: float
    amp: float
    theta: float
    grid: RadialGrid  # the rescaled (hat) grid
    kernel: RieszKernel

    @classmethod
    def build(cls, alpha: float, rho: float, orig_grid: RadialGrid) -> "_Frame":
        b = rho ** (2.0 / (alpha - 1.0))
        amp = rho * b**1.5
        theta = b**alpha
        grid = build_grid(orig_grid.n, b * orig_grid.r_max)
        return cls(
            alpha=alpha,
            rho=rho,
            b=b,
            amp=amp,
            theta=theta,
            grid=grid,
            kernel=cached_kernel(alpha, grid),
        )

    @property
    def energy_scale(self) -> float:
        return self.rho**2 * self.b**2

    def pull_init(self, init: RadialField) -> RadialField:
        # index-wise relabeling: same values up to amplitude
        return RadialField(self.grid, init.values / self.amp)

    def push_state(self, w: RadialField, orig_grid: RadialGrid) -> RadialField:
        return RadialField(orig_grid, self.amp * w.values)

    def push_report(self, rep_hat: EnergyReport) -> EnergyReport:
        s = self.energy_scale
        return EnergyReport.from_parts(
            s * rep_hat.A, s * self.theta * rep_hat.B, s * rep_hat.C, self.rho**2
        )

    def push_lambda(self, lam_hat: float) -> float:
        return lam_hat * self.b**2

    def push_residuals(self, res_hat: IdentityResiduals) -> IdentityResiduals:
        # Nehari/Pohozaev are ratios of same-scale energies: frame invariant.
        # The EL sup ratio picks up amp * b^2 (residual field) over the
        # energy scale rho^2 b^2.
        return IdentityResiduals(
            nehari=res_hat.nehari,
            pohozaev=res_hat.pohozaev,
            euler_lagrange_sup=res_hat.euler_lagrange_sup * self.amp / self.rho**2,
        )


# ---------------------------------------------------------------------------
# public solvers


def minimize_normalized(
    params: GppParams,
    kernel: RieszKernel,
    cfg: SolverConfig,
    init: RadialField | None = None,
) -> SolveResult:
    """Constrained minimization of F over the mass sphere |u|_2 = rho.

    Small masses at alpha > 1 are solved in the rescaled mass-1 frame (the
    near-Choquard regime), everything else directly on the caller's grid.
    The result's kind is "global-min" for alpha >= 1 or for alpha < 1 with
    F < 0, else "local-min".  A flow that spreads to the domain boundary with
    F -> 0 and vanishing gradient is returned with collapsed=True and
    converged=False (no bound state at this mass).
    """
    alpha, rho = params.alpha, params.rho
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != params alpha {alpha}")
    use_rescaled = alpha > 1.0 and rho < 0.5
    detect_collapse = alpha <= 1.0

    if use_rescaled:
        frame = _Frame.build(alpha, rho, kernel.grid)
        work_kernel, work_rho, theta = frame.kernel, 1.0, frame.theta
        u0 = (
            frame.pull_init(init)
            if init is not None
            else _auto_seed(frame.kernel, 1.0, theta, cfg)
        )
    else:
        frame = None
        work_kernel, work_rho, theta = kernel, rho, 1.0
        u0 = init if init is not None else _auto_seed(kernel, rho, 1.0, cfg)

    flow = _Flow(work_kernel, work_rho, theta, cfg)
    u, iters, collapsed = flow.run(u0, detect_collapse=detect_collapse)

    if not collapsed:
        rep = evaluate(u, work_kernel)
        lam = _nehari_lambda(rep, theta)
        u, lam, nsteps, _ = _newton_constrained(work_kernel, u, lam, work_rho, theta)
        u = u.with_values(np.abs(u.values))
        iters += nsteps
    else:
        lam = _nehari_lambda(evaluate(u, work_kernel), theta)

    if frame is not None:
        state = frame.push_state(u, kernel.grid)
        rep_hat = evaluate(u, frame.kernel)
        report = frame.push_report(rep_hat)
        res_hat = identity_residuals(u, lam, frame.kernel, cubic_coeff=frame.theta)
        res = frame.push_residuals(res_hat)
        lam_out = frame.push_lambda(lam)
        # the pushed EL sup rescales by amp/rho^2, which can dwarf or bury the
        # actual defect; gate convergence on the frame where the solve ran
        el_gate = res_hat.euler_lagrange_sup
    else:
        state = u
        report = evaluate(state, kernel)
        res = identity_residuals(state, lam, kernel)
        lam_out = lam
        el_gate = res.euler_lagrange_sup

    converged = (not collapsed) and el_gate <= cfg.residual_tol
    if alpha >= 1.0 or report.F < 0.0:
        kind = "global-min"
    else:
        kind = "local-min"
    return SolveResult(
        state=state,
        lam=lam_out,
        report=report,
        residuals=res,
        kind=kind,
        iterations=iters,
        converged=converged,
        collapsed=collapsed,
    )


def solve_mp_type2(
    params: GppParams,
    kernel: RieszKernel,
    cfg: SolverConfig,
    init: RadialField | None = None,
) -> SolveResult:
    """Mountain-pass state of type II for alpha in (0,1): a fiber-local-maximum
    saddle inside the admissible cone.

    Solved in the rescaled mass-1 frame, where the cubic coefficient becomes
    theta = rho^{-2 alpha/(1-alpha)}: small for large rho, so the state is a
    weak perturbation of the pure Choquard mountain-pass profile.  Starting
    from that profile (or from ``init``), continue in the cubic coefficient
    from 0 to theta with the bordered Newton iteration, halving the
    continuation step whenever Newton fails to contract.  The converged state
    must lie in the admissible cone, be a strict local maximum along its
    dilation fiber, and carry a positive multiplier; otherwise the matching
    SolverError is raised.

    Extras: ``mp_level`` (the pushed energy level), ``fiber_d2phi_at_1`` and
    ``theta_hat`` (hat-frame diagnostics), ``hat_state`` and
    ``choquard_profile`` (mass-1 fields on the hat grid, for profile
    comparisons across masses).
    """
    alpha, rho = params.alpha, params.rho
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"mountain-pass type II requires alpha in (0,1), got {alpha}")
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != params alpha {alpha}")
    h_const = cfg.H_fraction * threshold_constants(alpha).H_bound

    frame = _Frame.build(alpha, rho, kernel.grid)
    theta = frame.theta

    def in_cone(rep_hat: EnergyReport) -> bool:
        # |grad u|^{3-alpha} < H rho^{-(1-alpha)} D(u), in hat-frame scalars:
        # A_hat^{(3-alpha)/2} < H theta^{-(1-alpha)} C_hat
        return rep_hat.A ** (0.5 * (3.0 - alpha)) < h_const * theta ** (
            alpha - 1.0
        ) * rep_hat.C

    base_profile = None
    if init is not None:
        w = frame.pull_init(init)
        lam_hat = _nehari_lambda(evaluate(w, frame.kernel), theta)
        t_now, iters = theta, 0  # warm start: already at the target coefficient
    else:
        base = solve_choquard_mp(alpha, frame.kernel, cfg)
        w, lam_hat = base.state, base.lam
        base_profile = base.state
        t_now, iters = 0.0, base.iterations

    newton_tol = max(1e-11, 1e-3 * cfg.residual_tol)
    step = max(theta - t_now, theta)
    while True:
        t_try = min(t_now + step, theta)
        w_try, lam_try, nsteps, best = _newton_constrained(
            frame.kernel, w, lam_hat, 1.0, t_try
        )
        iters += nsteps
        if best <= newton_tol:
            w, lam_hat, t_now = w_try, lam_try, t_try
            if t_now >= theta:
                break
            step = min(2.0 * step, theta - t_now)
        else:
            step *= 0.5
            if step < theta * 2.0**-20:
                raise NoConvergenceError(
                    "continuation in the cubic coefficient stalled "
                    f"(residual {best:.2e} at step {step:.2e})"
                )

    w = w.with_values(np.abs(w.values))
    rep_hat = evaluate(w, frame.kernel)
    eff = EnergyReport.from_parts(rep_hat.A, theta * rep_hat.B, rep_hat.C, 1.0)
    prof = fiber_profile(eff, alpha)
    if not in_cone(rep_hat):
        raise LeftAdmissibleConeError(
            "converged state violates the admissible-cone inequality"
        )
    d2 = prof.d2phi_at(1.0)
    if d2 >= 0.0 or lam_hat <= 0.0:
        raise NoConvergenceError(
            "converged state is not a fiber local maximum with positive multiplier"
        )
    res_hat = identity_residuals(w, lam_hat, frame.kernel, cubic_coeff=theta)
    if res_hat.euler_lagrange_sup > cfg.residual_tol:
        raise NoConvergenceError(
            f"euler-lagrange residual {res_hat.euler_lagrange_sup:.2e} above tolerance"
        )
    report = frame.push_report(rep_hat)
    return SolveResult(
        state=frame.push_state(w, kernel.grid),
        lam=frame.push_lambda(lam_hat),
        report=report,
        residuals=frame.push_residuals(res_hat),
        kind="mp-type2",
        iterations=iters,
        converged=True,
        extras={
            "mp_level": report.F,
            "fiber_d2phi_at_1": d2,
            "theta_hat": theta,
            "hat_state": w,
            "choquard_profile": base_profile,
        },
    )


def solve_choquard_min(
    alpha: float,
    kernel: RieszKernel,
    cfg: SolverConfig,
    rho: float = 1.0,
) -> SolveResult:
    """Ground state of the Choquard energy A/2 - C/4 on the mass sphere,
    for 1 < alpha < 3 (where the constrained infimum is attained and
    negative)."""
    if not (1.0 < alpha < 3.0):
        raise ValueError(f"constrained Choquard minimum requires alpha in (1,3), got {alpha}")
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != requested alpha {alpha}")
    flow = _Flow(kernel, rho, 0.0, cfg)
    u0 = _auto_seed(kernel, rho, 0.0, cfg)
    u, iters, _ = flow.run(u0)
    rep = evaluate(u, kernel)
    lam = _nehari_lambda(rep, 0.0)
    u, lam, nsteps, _ = _newton_constrained(kernel, u, lam, rho, 0.0)
    u = u.with_values(np.abs(u.values))
    rep = evaluate(u, kernel)
    res = identity_residuals(u, lam, kernel, cubic_coeff=0.0)
    converged = res.euler_lagrange_sup <= cfg.residual_tol
    if not converged:
        raise NoConvergenceError(
            f"choquard minimum residual {res.euler_lagrange_sup:.2e} above tolerance"
        )
    return SolveResult(
        state=u,
        lam=lam,
        report=rep,
        residuals=res,
        kind="choquard-min",
        iterations=iters + nsteps,
        converged=True,
        extras={"m_choquard": rep.E_choquard},
    )


def solve_choquard_frequency(
    alpha: float,
    kernel: RieszKernel,
    cfg: SolverConfig,
) -> SolveResult:
    """Ground state of the fixed-frequency Choquard equation

        -Delta w + w = (I_alpha * w^2) w

    by gradient flow on the action A/2 + |w|_2^2/2 - C/4, re-normalized after
    every step so the unconstrained Nehari identity A + |w|_2^2 = C holds.
    The returned mass |w|_2 is the critical mass rho_star when alpha = 1.
    """
    if not (0.0 < alpha < 3.0):
        raise ValueError(f"alpha must lie in (0,3), got {alpha}")
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != requested alpha {alpha}")
    grid = kernel.grid
    r = grid.nodes
    bands = neg_laplacian_v_bands(grid)
    m = kernel.matrix

    def nehari_rescale(vals):
        u = RadialField(grid, vals)
        rep = evaluate(u, kernel)
        if rep.C <= 0:
            raise NoConvergenceError("interaction energy vanished during flow")
        s = math.sqrt((rep.A + rep.rho2) / rep.C)
        return s * vals, (rep.A + rep.rho2) * s**2 * 0.25  # action on the manifold

    vals = np.exp(-0.5 * (r / cfg.seed_width) ** 2)
    vals, action = nehari_rescale(vals)
    dt = cfg.dt
    dt_floor = cfg.dt * 2.0**-40
    ab_dt, ab = None, None
    it = 0
    stall = 0
    while it < cfg.max_iters:
        it += 1
        if dt != ab_dt:
            ab = dt * bands
            ab[2] += 1.0 + dt  # implicit -Delta + 1
            ab_dt = dt
        phi = m @ vals**2
        rhs = r * (vals + dt * phi * vals)
        v = solve_banded((2, 2), ab, rhs)
        try:
            vals_try, action_try = nehari_rescale(np.abs(v / r))
        except NoConvergenceError:
            dt *= 0.5
            continue
        if action_try <= action + 1e-13 * max(abs(action), 1e-300):
            if abs(action_try - action) <= 1e-13 * max(abs(action), 1e-300):
                stall += 1
            else:
                stall = 0
            vals, action = vals_try, action_try
            dt = min(dt * 1.3, cfg.dt * 512.0)
            if stall >= 3:
                break
        else:
            dt *= 0.5
            if dt < dt_floor:
                break

    # free Newton polish on -Delta w + w - (I_alpha*w^2) w = 0
    lu = _dense_neg_laplacian(grid)
    x = vals

    def residual(xv):
        phi = m @ xv**2
        return lu @ xv + xv - phi * xv, phi

    g, phi = residual(x)
    scale = float(np.max(np.abs(x)) + np.max(np.abs(phi * x)))
    best = float(np.max(np.abs(g))) / scale
    nsteps = 0
    for nsteps in range(1, 13):
        jac = lu - (2.0 * x[:, None]) * m * x[None, :]
        jac[np.arange(grid.n), np.arange(grid.n)] += 1.0 - phi
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        t, improved = 1.0, False
        for _ in range(6):
            x_try = x + t * delta
            g_try, phi_try = residual(x_try)
            sup_try = float(np.max(np.abs(g_try))) / float(
                np.max(np.abs(x_try)) + np.max(np.abs(phi_try * x_try))
            )
            if sup_try < best:
                x, g, phi, best = x_try, g_try, phi_try, sup_try
                improved = True
                break
            t *= 0.5
        if not improved or best < 1e-13:
            break
    x = np.abs(x)
    w_star = RadialField(grid, x)
    rep = evaluate(w_star, kernel)
    res = identity_residuals(w_star, 1.0, kernel, cubic_coeff=0.0)
    converged = res.euler_lagrange_sup <= cfg.residual_tol
    if not converged:
        raise NoConvergenceError(
            f"frequency solve residual {res.euler_lagrange_sup:.2e} above tolerance"
        )
    rho_star = math.sqrt(rep.rho2)
    return SolveResult(
        state=w_star,
        lam=1.0,
        report=rep,
        residuals=res,
        kind="choquard-frequency",
        iterations=it + nsteps,
        converged=True,
        # the action A/2 + rho2/2 - C/4 equals (A + rho2)/4 on the Nehari
        # manifold; at alpha = 1 Pohozaev forces it to rho_star^2/2
        extras={"rho_star": rho_star, "S1": 0.25 * (rep.A + rep.rho2)},
    )


def choquard_quotient(u: RadialField, kernel: RieszKernel) -> float:
    """Q(u) = |grad u|_2^{3-alpha} |u|_2^{1+alpha} / D(u); invariant under
    dilations and scalar multiples."""
    rep = evaluate(u, kernel)
    if rep.C <= 0:
        raise ValueError("quotient undefined for vanishing interaction energy")
    alpha = kernel.alpha
    return rep.A ** (0.5 * (3.0 - alpha)) * rep.rho2 ** (0.5 * (1.0 + alpha)) / rep.C


def solve_choquard_mp(
    alpha: float,
    kernel: RieszKernel,
    cfg: SolverConfig,
) -> SolveResult:
    """Mountain-pass state of the pure Choquard problem for alpha in (0,1).

    The mass-sphere saddle structure lives entirely along the dilation fiber;
    quotienting it out, the state minimizes the scale-invariant quotient Q,
    whose minimizer family is the free ground state of
    -Delta w + w = (I_alpha * w^2) w.  Solve that (a plain Nehari-manifold
    minimization, no saddle chasing), read off S_alpha = Q(w), then map w by
    the unique (amplitude, dilation) pair to mass 1 and fiber-maximum form
    A = (3 - alpha) C / 4 and polish with the constrained Newton iteration.
    Extras carry S_alpha and the mountain-pass level M1 recovered from it by
    the closed-form inversion.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"Choquard mountain pass requires alpha in (0,1), got {alpha}")
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != requested alpha {alpha}")
    # The frequency-1 state has width O(1) but the mass-1 fiber-max form is
    # concentrated by t_bar ~ 10^3 (alpha = 1/2) and worse as alpha -> 1, so
    # the free solve runs on its own O(1) grid and only the rescaled profile
    # is sampled on the caller's (suitably fine) grid.
    free_grid = build_grid(kernel.grid.n, _FREE_CHOQUARD_R_MAX)
    free_kernel = cached_kernel(alpha, free_grid)
    free = solve_choquard_frequency(alpha, free_kernel, cfg)
    s_alpha = choquard_quotient(free.state, free_kernel)
    rep1 = free.report
    # both rescalings leave Q fixed: amplitude 1/rho to mass 1, then the
    # dilation that puts the fiber maximum at t = 1
    t_bar = (4.0 * rep1.A * rep1.rho2 / ((3.0 - alpha) * rep1.C)) ** (
        1.0 / (1.0 - alpha)
    )
    # v0(r) = t^{3/2} w(t r) / rho1 on the caller grid; midpoint nodes scale
    # linearly with r_max, so the t-fold stretched grid samples exactly t*r
    stretched = build_grid(kernel.grid.n, t_bar * kernel.grid.r_max)
    vals = t_bar**1.5 / math.sqrt(rep1.rho2) * resample_field(free.state, stretched).values
    v = project_mass(RadialField(kernel.grid, vals), 1.0)
    rep = evaluate(v, kernel)
    lam = 0.25 * (1.0 + alpha) * rep.C  # EL + mass 1 => lam = (1+alpha) C / 4
    v, lam, nsteps, _ = _newton_constrained(kernel, v, lam, 1.0, 0.0)
    v = v.with_values(np.abs(v.values))
    rep = evaluate(v, kernel)
    res = identity_residuals(v, lam, kernel, cubic_coeff=0.0)
    if res.euler_lagrange_sup > cfg.residual_tol:
        raise NoConvergenceError(
            f"choquard mountain-pass residual {res.euler_lagrange_sup:.2e} above tolerance"
        )
    m1 = (
        s_alpha**2
        * 2.0 ** (3.0 + alpha)
        * (1.0 - alpha) ** (1.0 - alpha)
        / (3.0 - alpha) ** (3.0 - alpha)
    ) ** (1.0 / (1.0 - alpha))
    return SolveResult(
        state=v,
        lam=lam,
        report=rep,
        residuals=res,
        kind="choquard-mp",
        iterations=free.iterations + nsteps,
        converged=True,
        extras={"S_alpha": s_alpha, "M1_choquard": m1, "fiber_time": t_bar},
    )


def solve_tf(
    alpha: float, kernel: RieszKernel, cfg: SolverConfig, rho: float = 1.0
) -> SolveResult:
    """Thomas-Fermi minimizer at mass rho (default 1): damped fixed point on

        phi  <-  (I_alpha * phi + 4 m)_+

    where m is chosen by bisection at every step so the update has mass rho^2.
    Returns z = sqrt(phi); the 'lam' slot carries the multiplier m, and the
    residual slots carry (nehari) the pointwise support identity
    |(z^2 - I_alpha*z^2) - 4m|, (pohozaev) the worst of the two closed-form
    moment identities |z|_4^4 = -4(3-alpha)/alpha * E, D(z) = -12/alpha * E
    for the energy E, and (euler_lagrange_sup) the final fixed-point residual.
    """
    if not (0.0 < alpha < 3.0):
        raise ValueError(f"alpha must lie in (0,3), got {alpha}")
    if kernel.alpha != alpha:
        raise ValueError(f"kernel alpha {kernel.alpha} != requested alpha {alpha}")
    if rho <= 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    grid = kernel.grid
    w = grid.weights
    m_mat = kernel.matrix
    omega = cfg.damping
    mass = rho**2

    phi = np.exp(-((grid.nodes / cfg.seed_width) ** 2))
    phi *= mass / (w @ phi)

    def multiplier_for(psi: np.ndarray) -> float:
        lo = -float(np.max(psi)) / 4.0
        hi = 0.0
        t_hi = w @ np.maximum(psi, 0.0) - mass
        if t_hi < 0.0:
            raise BisectionFailureError(
                "potential mass below target: multiplier bracket invalid "
                "(domain too small?)"
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            t_mid = w @ np.maximum(psi + 4.0 * mid, 0.0) - mass
            if t_mid < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(1.0, abs(lo)):
                break
        return 0.5 * (lo + hi)

    fp_res = math.inf
    m_val = 0.0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        psi = m_mat @ phi
        m_val = multiplier_for(psi)
        phi_new = np.maximum(psi + 4.0 * m_val, 0.0)
        fp_res = float(np.max(np.abs(phi_new - phi))) / float(np.max(phi))
        phi = (1.0 - omega) * phi + omega * phi_new
        if fp_res <= min(cfg.residual_tol, 1e-10):
            break

    psi = m_mat @ phi
    z = RadialField(grid, np.sqrt(np.maximum(phi, 0.0)))
    b_val = float(w @ phi**2)
    c_val = float(w @ (phi * psi))
    m_tf = 0.25 * b_val - 0.25 * c_val  # E_TF(z); equals m_val at the fixed point
    support = phi > 1e-9 * np.max(phi)
    r_support = float(np.max(grid.nodes[support])) if np.any(support) else 0.0

    interior = phi > 1e-2 * np.max(phi)
    scale = max(float(np.max(phi)), abs(4.0 * m_val))
    support_identity = (
        float(np.max(np.abs((phi - psi - 4.0 * m_val)[interior]))) / scale
        if np.any(interior)
        else math.inf
    )
    rel1 = abs(b_val + 4.0 * (3.0 - alpha) / alpha * m_tf) / abs(
        4.0 * (3.0 - alpha) / alpha * m_tf
    )
    rel2 = abs(c_val + 12.0 / alpha * m_tf) / abs(12.0 / alpha * m_tf)
    res = IdentityResiduals(
        nehari=support_identity,
        pohozaev=max(rel1, rel2),
        euler_lagrange_sup=fp_res,
    )
    rep = EnergyReport.from_parts(0.0, b_val, c_val, float(w @ phi))
    converged = fp_res <= cfg.residual_tol
    if not converged:
        raise NoConvergenceError(f"fixed-point residual {fp_res:.2e} above tolerance")
    return SolveResult(
        state=z,
        lam=m_val,
        report=rep,
        residuals=res,
        kind="thomas-fermi",
        iterations=it,
        converged=True,
        extras={"m_tf": m_tf, "R_support": r_support},
    )
