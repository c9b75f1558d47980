"""Energy functionals, Euler-Lagrange residuals, the Energy-Nehari-Pohozaev
algebra, fiber maps t -> F(t^{3/2} u(t x)), and closed-form threshold
constants for the strongly nonlocal range alpha in (0,1).

Conventions, with A = |grad u|_2^2, B = |u|_4^4, C = D(u) = int (I_alpha*u^2)u^2:

    F(u)          = A/2 + B/4 - C/4          (full energy)
    E_choquard(u) = A/2 - C/4                (cubic term dropped)
    E_tf(u)       = B/4 - C/4                (gradient term dropped)
    phi_u(t)      = (A/2) t^2 + (B/4) t^3 - (C/4) t^{3-alpha}

where phi_u is F along the mass-preserving dilation t^{3/2} u(t x).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import RadialField, dirichlet_energy, l2_norm, l4_norm4, neg_laplacian
from .riesz import RieszConstants, RieszKernel, apply_potential, interaction_energy

__all__ = [
    "EnergyReport",
    "FiberProfile",
    "IdentityResiduals",
    "ThresholdConstants",
    "evaluate",
    "euler_lagrange_residual",
    "identity_residuals",
    "solve_enp_system",
    "fiber_profile",
    "threshold_constants",
    "barrier",
]


@dataclass(frozen=True)
class EnergyReport:
    """All scalar functionals of one field, plus the Nehari multiplier.

    lambda_nehari = (C - A - B) / rho2 is exact for stationary points of the
    discretized constrained energy, and is the multiplier reported throughout.
    """

    A: float
    B: float
    C: float
    rho2: float
    F: float
    E_choquard: float
    E_tf: float
    lambda_nehari: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_parts(cls, A: float, B: float, C: float, rho2: float) -> "EnergyReport":
        lam = (C - A - B) / rho2 if rho2 > 0 else 0.0
        return cls(
            A=A,
            B=B,
            C=C,
            rho2=rho2,
            F=0.5 * A + 0.25 * B - 0.25 * C,
            E_choquard=0.5 * A - 0.25 * C,
            E_tf=0.25 * B - 0.25 * C,
            lambda_nehari=lam,
        )


@dataclass(frozen=True)
class IdentityResiduals:
    """Nehari / Pohozaev / Euler-Lagrange defects, each divided by
    max(A, B, C, |lambda| rho^2)."""

    nehari: float
    pohozaev: float
    euler_lagrange_sup: float


@dataclass(frozen=True)
class ThresholdConstants:
    """Closed-form constants controlling existence for alpha in (0, 1)."""

    K_alpha: float
    barK_alpha: float
    H_bound: float


def evaluate(u: RadialField, kernel: RieszKernel) -> EnergyReport:
    """Compute A, B, C, rho^2 by quadrature and fill the derived functionals."""
    kernel.grid.require_same(u.grid)
    A = dirichlet_energy(u)
    B = l4_norm4(u)
    C = interaction_energy(kernel, u)
    rho2 = l2_norm(u) ** 2
    return EnergyReport.from_parts(A, B, C, rho2)


def euler_lagrange_residual(
    u: RadialField,
    lam: float,
    kernel: RieszKernel,
    cubic_coeff: float = 1.0,
) -> RadialField:
    """-Delta u + lam u + cubic_coeff u^3 - (I_alpha * u^2) u on the nodes.

    cubic_coeff is 1 for the equation itself; the rescaled solver frames pass
    their coefficient through here.
    """
    kernel.grid.require_same(u.grid)
    phi = apply_potential(kernel, u.with_values(u.values**2))
    res = (
        neg_laplacian(u)
        + lam * u.values
        + cubic_coeff * u.values**3
        - phi.values * u.values
    )
    return u.with_values(res)


def identity_residuals(
    u: RadialField,
    lam: float,
    kernel: RieszKernel,
    cubic_coeff: float = 1.0,
) -> IdentityResiduals:
    """Relative Nehari / Pohozaev / EL defects of (u, lam).

    Nehari:    A + lam rho^2 + theta B - C = 0
    Pohozaev:  A/2 + (3/2) lam rho^2 + (3/4) theta B - ((3+alpha)/4) C = 0

    with theta = cubic_coeff (0 for the Choquard equation, 1 for the full
    equation).
    """
    rep = evaluate(u, kernel)
    alpha = kernel.alpha
    tB = cubic_coeff * rep.B
    scale = max(rep.A, tB, rep.C, abs(lam) * rep.rho2)
    if scale == 0.0:
        scale = 1.0
    nehari = (rep.A + lam * rep.rho2 + tB - rep.C) / scale
    poho = (
        0.5 * rep.A
        + 1.5 * lam * rep.rho2
        + 0.75 * tB
        - 0.25 * (3.0 + alpha) * rep.C
    ) / scale
    el = euler_lagrange_residual(u, lam, kernel, cubic_coeff=cubic_coeff)
    # The EL defect is a field, so it is measured against the sup of the
    # equation's own terms (not the energy scale, which carries different
    # units and misstates the defect for very concentrated or very spread
    # profiles).
    vals = u.values
    pot = apply_potential(kernel, u.with_values(vals**2)).values
    el_scale = (
        abs(lam) * float(np.max(np.abs(vals)))
        + abs(cubic_coeff) * float(np.max(np.abs(vals))) ** 3
        + float(np.max(np.abs(pot * vals)))
    )
    if el_scale == 0.0:
        el_scale = 1.0
    el_sup = float(np.max(np.abs(el.values))) / el_scale
    return IdentityResiduals(nehari=nehari, pohozaev=poho, euler_lagrange_sup=el_sup)


def solve_enp_system(A: float, B: float, rho: float, alpha: float):
    """Closed-form solution (mu, lambda, C) of the Energy-Nehari-Pohozaev
    system for given A, B at mass rho:

        mu       = (2(1-alpha) A - alpha B) / (4(3-alpha))
        lambda   = ((1+alpha) A + alpha B) / ((3-alpha) rho^2)
        C        = (4A + 3B) / (3-alpha)

    mu is the energy level F(u); the triple makes the Nehari and Pohozaev
    identities and F = mu hold simultaneously.
    """
    if alpha == 3.0:
        raise ValueError("the system degenerates at alpha = 3")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    mu = (2.0 * (1.0 - alpha) * A - alpha * B) / (4.0 * (3.0 - alpha))
    lam = ((1.0 + alpha) * A + alpha * B) / ((3.0 - alpha) * rho**2)
    C = (4.0 * A + 3.0 * B) / (3.0 - alpha)
    return mu, lam, C


@dataclass(frozen=True)
class FiberProfile:
    """The fiber map phi(t) = (A/2) t^2 + (B/4) t^3 - (C/4) t^{3-alpha} and its
    critical points.

    t_max (local maximum) and t_min (local minimum, beyond t_max when both
    exist) are None when the corresponding critical point does not exist;
    no exception is raised for that outcome.
    """

    A: float
    B: float
    C: float
    alpha: float
    t_max: float | None
    t_min: float | None

    def phi_at(self, t):
        t = np.asarray(t, dtype=float)
        out = (
            0.5 * self.A * t**2
            + 0.25 * self.B * t**3
            - 0.25 * self.C * t ** (3.0 - self.alpha)
        )
        return float(out) if out.ndim == 0 else out

    def dphi_at(self, t):
        t = np.asarray(t, dtype=float)
        out = (
            self.A * t
            + 0.75 * self.B * t**2
            - 0.25 * (3.0 - self.alpha) * self.C * t ** (2.0 - self.alpha)
        )
        return float(out) if out.ndim == 0 else out

    def d2phi_at(self, t):
        t = np.asarray(t, dtype=float)
        out = (
            self.A
            + 1.5 * self.B * t
            - 0.25
            * (3.0 - self.alpha)
            * (2.0 - self.alpha)
            * self.C
            * t ** (1.0 - self.alpha)
        )
        return float(out) if out.ndim == 0 else out


def _psi(A, B, C, alpha, t):
    # phi'(t) / t; roots of psi are the fiber critical points
    return A + 0.75 * B * t - 0.25 * (3.0 - alpha) * C * t ** (1.0 - alpha)


def _dpsi(A, B, C, alpha, t):
    return 0.75 * B + 0.25 * (3.0 - alpha) * (1.0 - alpha) * C * t ** (-alpha)


def _bisect_root(f, lo, hi, rel_tol=1e-12, max_iter=200):
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("no sign change on bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo) <= rel_tol * mid:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def fiber_profile(report: EnergyReport, alpha: float) -> FiberProfile:
    """Locate the critical points of phi_u by safeguarded root-finding on
    psi(t) = phi'(t)/t.

    alpha < 1: psi dips from psi(0+) = A > 0 to a minimum at
    t_* = [ (3-alpha)(1-alpha) C / (3B) ]^{1/alpha} and rises again; two roots
    (t_max < t_*, t_min > t_*) exist iff psi(t_*) < 0.  The first root is
    bracketed by [T, (1/alpha)^{1/(1-alpha)} T] with
    T = (4A/((3-alpha)C))^{1/(1-alpha)}.  alpha >= 1: psi is increasing with
    psi(0+) <= A - C(3-alpha)/4 (alpha=1) or -inf, so at most one root, a
    local minimum.  Roots are bisected to 1e-12 relative and polished with
    one Newton step.
    """
    A, B, C = report.A, report.B, report.C
    if not A > 0:
        raise ValueError("fiber_profile requires A > 0")
    if not (0.0 < alpha < 3.0):
        raise ValueError(f"alpha must lie in (0,3), got {alpha}")

    def psi(t):
        return _psi(A, B, C, alpha, t)

    def polish(t):
        dp = _dpsi(A, B, C, alpha, t)
        if dp != 0.0 and np.isfinite(dp):
            t2 = t - psi(t) / dp
            if t2 > 0 and abs(t2 - t) < 0.5 * t:
                return t2
        return t

    t_max = t_min = None
    if C > 0.0 and alpha < 1.0:
        T = (4.0 * A / ((3.0 - alpha) * C)) ** (1.0 / (1.0 - alpha))
        if B > 0.0:
            t_star = ((3.0 - alpha) * (1.0 - alpha) * C / (3.0 * B)) ** (1.0 / alpha)
            if psi(t_star) < 0.0:
                # local max root in (0, t_star): prefer the closed-form bracket
                # [T, (1/alpha)^{1/(1-alpha)} T], fall back to the dip point
                T_hi = (1.0 / alpha) ** (1.0 / (1.0 - alpha)) * T
                lo = T
                while lo >= t_star or psi(lo) <= 0.0:
                    lo *= 0.5
                hi = T_hi if (lo < T_hi < t_star and psi(T_hi) < 0.0) else t_star
                t_max = polish(_bisect_root(psi, lo, hi))
                hi = max(2.0 * t_star, T_hi)
                while psi(hi) <= 0.0:
                    hi *= 2.0
                t_min = polish(_bisect_root(psi, t_star, hi))
        else:
            # psi(T) = A + 0 - A: the bracket endpoint is the exact root
            t_max = T
    elif C > 0.0 and alpha == 1.0:
        if B > 0.0 and A < 0.5 * C:
            t_min = (2.0 * C - 4.0 * A) / (3.0 * B)
    elif C > 0.0 and alpha > 1.0:
        lo = hi = 1.0
        while psi(lo) >= 0.0:
            lo *= 0.5
            if lo < 1e-300:
                lo = None
                break
        if lo is not None:
            while psi(hi) <= 0.0:
                hi *= 2.0
            t_min = polish(_bisect_root(psi, lo, hi))
    return FiberProfile(A=A, B=B, C=C, alpha=alpha, t_max=t_max, t_min=t_min)


def threshold_constants(alpha: float) -> ThresholdConstants:
    """K_alpha, bar-K_alpha and the H bound for alpha in (0,1).

    K_alpha is the constant in the fiber-minimum law
    min_t ( (3/4) B t - ((3-alpha)/4) C t^{1-alpha} ) = -(C / B^{1-alpha})^{1/alpha} K_alpha,
    bar-K_alpha = (K_alpha^{1/2} c_alpha^{1/(2 alpha)} cbar^{4/3})^{-1} is the
    mass below which no normalized solution exists, and H_bound is the
    constant in the dilation-cone membership inequality
    |grad u|_2^{3-alpha} < H rho^{-(1-alpha)} D(u).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"threshold constants require alpha in (0,1), got {alpha}")
    from .riesz import constants as riesz_constants

    rc = riesz_constants(alpha)
    K = (
        0.75
        * alpha
        * ((3.0 - alpha) / 3.0) ** (1.0 / alpha)
        * (1.0 - alpha) ** ((1.0 - alpha) / alpha)
    )
    barK = 1.0 / (
        math.sqrt(K) * rc.c_alpha_hls ** (1.0 / (2.0 * alpha)) * rc.c_bar_gn ** (4.0 / 3.0)
    )
    H = (
        0.25
        * (3.0 - alpha)
        * (2.0 / (3.0 * rc.c_bar_gn**4)) ** (1.0 - alpha)
        * alpha**alpha
        * (1.0 - alpha) ** (1.0 - alpha)
    )
    return ThresholdConstants(K_alpha=K, barK_alpha=barK, H_bound=H)


def barrier(rho: float, alpha: float, consts: RieszConstants):
    """Maximizer of g2(R) = R^2/2 - (cbarbar_alpha/4) rho^{1+alpha} R^{3-alpha}.

    Returns (R_rho, g2(R_rho)); the maximum value is positive for every rho,
    and R_rho = [4/((3-alpha) cbarbar_alpha)]^{1/(1-alpha)} rho^{-(1+alpha)/(1-alpha)}.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"barrier requires alpha in (0,1), got {alpha}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    cbb = consts.c_barbar_alpha
    R = (4.0 / ((3.0 - alpha) * cbb)) ** (1.0 / (1.0 - alpha)) * rho ** (
        -(1.0 + alpha) / (1.0 - alpha)
    )
    g2 = 0.5 * R**2 - 0.25 * cbb * rho ** (1.0 + alpha) * R ** (3.0 - alpha)
    return R, g2
