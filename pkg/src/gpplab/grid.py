"""Radial grids, fields, quadrature and the mass-preserving rescalings.

Everything lives on a uniform cell-centered grid on (0, r_max): nodes
r_i = (i + 1/2) h with h = r_max / n.  Cell centering keeps the coordinate
singularity at r = 0 off the grid, and the midpoint rule in r is
super-algebraically accurate for smooth even profiles times r^2 (all odd
derivatives of u(r) r^2 vanish at r = 0 for even u, and the states of
interest decay exponentially or vanish before r_max).

Boundary conventions: Neumann u'(0) = 0 (fields are restrictions of smooth
even functions), Dirichlet u(r_max) = 0.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "RadialGrid",
    "RadialField",
    "GppParams",
    "GridError",
    "DegenerateFieldError",
    "build_grid",
    "integrate",
    "l2_norm",
    "l4_norm4",
    "lp_norm",
    "dirichlet_energy",
    "radial_gradient",
    "neg_laplacian",
    "neg_laplacian_v_bands",
    "project_mass",
    "dilate",
    "resample_field",
    "rescale_family",
    "dump_field",
    "load_field",
]

FOUR_PI = 4.0 * np.pi


class GridError(ValueError):
    """Invalid grid construction or mismatched grids."""


class DegenerateFieldError(ValueError):
    """Operation undefined on the zero field."""


@dataclass(frozen=True)
class RadialGrid:
    """Uniform cell-centered radial grid.

    nodes[i] = (i + 1/2) * h, h = r_max / n; weights[i] = 4 pi r_i^2 h
    approximate integration against 4 pi r^2 dr on (0, r_max).
    """

    n: int
    r_max: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.r_max / self.n

    def same_as(self, other: "RadialGrid") -> bool:
        return self.n == other.n and abs(self.r_max - other.r_max) <= 1e-12 * self.r_max

    def require_same(self, other: "RadialGrid") -> None:
        if not self.same_as(other):
            raise GridError(
                f"grid mismatch: (n={self.n}, r_max={self.r_max}) vs "
                f"(n={other.n}, r_max={other.r_max})"
            )


@dataclass(frozen=True)
class RadialField:
    """Values of a radial function on the nodes of a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise GridError(f"values shape {vals.shape} != (n={self.grid.n},)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.grid, values)


@dataclass(frozen=True)
class GppParams:
    """Problem parameters: Riesz order alpha in (0,3) and mass rho > 0.

    lam is optional and only consumed by the frequency-based rescaling
    (rescale_family kind="lambda"), where it must be positive.
    """

    alpha: float
    rho: float
    lam: float | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 3.0):
            raise ValueError(f"alpha must lie in (0,3), got {self.alpha}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.lam is not None and not self.lam > 0.0:
            raise ValueError(f"lam must be positive when given, got {self.lam}")


def build_grid(n: int, r_max: float) -> RadialGrid:
    """Build the uniform cell-centered grid with midpoint-rule weights."""
    if n < 8:
        raise GridError(f"n must be >= 8, got {n}")
    if not r_max > 0.0:
        raise GridError(f"r_max must be positive, got {r_max}")
    h = r_max / n
    nodes = (np.arange(n) + 0.5) * h
    weights = FOUR_PI * nodes**2 * h
    return RadialGrid(n=int(n), r_max=float(r_max), nodes=nodes, weights=weights)


def integrate(u: RadialField) -> float:
    """Integral of u over R^3 (radial): sum of weights * values."""
    return float(u.grid.weights @ u.values)


def l2_norm(u: RadialField) -> float:
    """|u|_2 = sqrt(int u^2 4 pi r^2 dr)."""
    return float(np.sqrt(u.grid.weights @ u.values**2))


def l4_norm4(u: RadialField) -> float:
    """|u|_4^4 (the fourth power, not the root)."""
    return float(u.grid.weights @ u.values**4)


def lp_norm(u: RadialField, p: float) -> float:
    """|u|_p for p >= 1."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((u.grid.weights @ np.abs(u.values) ** p) ** (1.0 / p))


def radial_gradient(u: RadialField) -> np.ndarray:
    """u'(r) on the nodes.

    Interior: 4th-order central differences; the even extension u(-r) = u(r)
    supplies ghost values across r = 0 (exact for smooth even profiles, and
    it enforces u'(0) = 0).  Last two nodes: one-sided 2nd-order differences
    built from interior values only, per the Dirichlet-side convention (the
    states of interest have already decayed there).
    """
    v = u.values
    n = u.grid.n
    h = u.grid.h
    # ghosts across r=0: node -1 mirrors node 0, node -2 mirrors node 1
    ext = np.concatenate((v[1::-1], v))
    g = np.empty(n)
    # 4th-order central on the extended array: ext index i+2 == node i
    core = (ext[:-4] - 8.0 * ext[1:-3] + 8.0 * ext[3:-1] - ext[4:]) / (12.0 * h)
    g[: n - 2] = core
    g[n - 2] = (v[n - 1] - v[n - 3]) / (2.0 * h)
    g[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
    return g


def dirichlet_energy(u: RadialField) -> float:
    """A = int |u'(r)|^2 4 pi r^2 dr by finite differences + midpoint rule."""
    g = radial_gradient(u)
    return float(u.grid.weights @ g**2)


def neg_laplacian(u: RadialField) -> np.ndarray:
    """(-Delta u)(r_i) for radial u, via the v = r u transform: -Delta u = -v''/r.

    v is odd and smooth across r = 0 and vanishes at r_max (Dirichlet), so
    odd-reflection ghosts at both ends keep the 4th-order stencil uniform.
    """
    r = u.grid.nodes
    h = u.grid.h
    v = r * u.values
    ext = np.empty(u.grid.n + 4)
    ext[2:-2] = v
    ext[1] = -v[0]
    ext[0] = -v[1]
    ext[-2] = -v[-1]
    ext[-1] = -v[-2]
    vpp = (
        -ext[:-4] + 16.0 * ext[1:-3] - 30.0 * ext[2:-2] + 16.0 * ext[3:-1] - ext[4:]
    ) / (12.0 * h**2)
    return -vpp / r


def neg_laplacian_v_bands(grid: RadialGrid) -> np.ndarray:
    """Banded matrix (scipy solve_banded layout, 2 super/sub diagonals) of the
    operator v -> -v'' used by neg_laplacian, including the ghost folding.

    The matrix is symmetric: folding the odd-reflection ghosts into rows
    0, 1, n-2, n-1 modifies the stencil to (46, -17, 1) at the ends.
    """
    n, h = grid.n, grid.h
    s = 1.0 / (12.0 * h**2)
    d0 = np.full(n, 30.0 * s)
    d0[0] = d0[-1] = 46.0 * s
    d1 = np.full(n - 1, -16.0 * s)
    d1[0] = d1[-1] = -17.0 * s
    d2 = np.full(n - 2, 1.0 * s)
    ab = np.zeros((5, n))
    ab[0, 2:] = d2
    ab[1, 1:] = d1
    ab[2, :] = d0
    ab[3, :-1] = d1
    ab[4, :-2] = d2
    return ab


def project_mass(u: RadialField, rho: float) -> RadialField:
    """Scale u so that |u|_2 = rho."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    norm = l2_norm(u)
    if norm == 0.0:
        raise DegenerateFieldError("cannot mass-project the zero field")
    return u.with_values((rho / norm) * u.values)


def _interpolate_at(u: RadialField, radii: np.ndarray) -> np.ndarray:
    """Evaluate u at arbitrary radii by monotone-cubic interpolation.

    The even extension across r = 0 supplies the correct flat behaviour at
    the origin; values beyond r_max are extended by zero.
    """
    r = u.grid.nodes
    # prepend mirrored nodes so queries in (0, h/2) interpolate, not extrapolate
    r_ext = np.concatenate((-r[2::-1], r))
    v_ext = np.concatenate((u.values[2::-1], u.values))
    interp = PchipInterpolator(r_ext, v_ext, extrapolate=False)
    out = interp(radii)
    out[~np.isfinite(out)] = 0.0
    out[radii > u.grid.r_max] = 0.0
    return out


def resample_field(u: RadialField, grid: RadialGrid) -> RadialField:
    """Move u onto another grid by monotone-cubic interpolation (zero beyond
    the source r_max).  Used for warm starts when the domain changes."""
    if u.grid.same_as(grid):
        return RadialField(grid, u.values.copy())
    return RadialField(grid, _interpolate_at(u, grid.nodes))


def dilate(u: RadialField, t: float) -> RadialField:
    """Mass-preserving dilation v(r) = t^{3/2} u(t r) on the same grid.

    Interpolation is monotone cubic with zero extension beyond r_max.  For
    t > 1 the needed samples t*r may fall beyond the grid; a warning is
    emitted when the field has not decayed there.
    """
    if not t > 0:
        raise ValueError(f"dilation parameter must be positive, got {t}")
    if t == 1.0:
        return u
    if t > 1.0:
        # values at r > r_max / t are read from the zero extension
        vmax = float(np.max(np.abs(u.values)))
        tail = float(np.max(np.abs(u.values[u.grid.nodes > u.grid.r_max / t])))
        if vmax > 0 and tail > 1e-8 * vmax:
            warnings.warn(
                f"dilate(t={t}): field not decayed beyond r_max/t "
                f"(tail/max = {tail / vmax:.2e}); accuracy degraded",
                stacklevel=2,
            )
    vals = t**1.5 * _interpolate_at(u, t * u.grid.nodes)
    return u.with_values(vals)


def rescale_family(
    u: RadialField,
    params: GppParams,
    kind: str,
    lam: float | None = None,
) -> RadialField:
    """The limit-profile rescalings, as exact grid relabelings.

    kind = "choquard-small-mass" (alpha > 1) or "choquard-large-mass"
    (alpha < 1): w(x) = rho^{-(alpha+2)/(alpha-1)} u(rho^{-2/(alpha-1)} x),
    which has mass 1.  kind = "tf": z = u / rho (mass 1, same grid).
    kind = "lambda": v(x) = lam^{-3/4} u(lam^{-1/2} x), mass rho (requires
    lam > 0).

    Except for "tf", the output lives on a rescaled grid (same n, scaled
    r_max), so no interpolation error enters and the mass statements are
    exact up to quadrature.
    """
    alpha, rho = params.alpha, params.rho
    if kind == "tf":
        return u.with_values(u.values / rho)
    if kind in ("choquard-small-mass", "choquard-large-mass"):
        if alpha == 1.0:
            raise ValueError(f"kind={kind!r} is undefined at alpha=1")
        if kind == "choquard-small-mass" and not alpha > 1.0:
            raise ValueError("choquard-small-mass requires alpha > 1")
        if kind == "choquard-large-mass" and not alpha < 1.0:
            raise ValueError("choquard-large-mass requires alpha < 1")
        scale = rho ** (2.0 / (alpha - 1.0))
        amp = rho ** (-(alpha + 2.0) / (alpha - 1.0))
        # w(x) = amp * u(x / scale): relabel the grid, r_new = scale * r_old
        new_grid = build_grid(u.grid.n, scale * u.grid.r_max)
        return RadialField(new_grid, amp * u.values)
    if kind == "lambda":
        if lam is None:
            lam = params.lam
        if lam is None or not lam > 0:
            raise ValueError("kind='lambda' requires a positive multiplier lam")
        # v(x) = lam^{-3/4} u(lam^{-1/2} x): relabel r_new = lam^{1/2} r_old
        new_grid = build_grid(u.grid.n, np.sqrt(lam) * u.grid.r_max)
        return RadialField(new_grid, lam**-0.75 * u.values)
    raise ValueError(f"unknown rescale kind {kind!r}")


def dump_field(u: RadialField, path, *, alpha: float | None = None,
               rho: float | None = None, extra_header: dict | None = None) -> None:
    """Write a field as two-column text (radius, value) with a '#' header."""
    with open(path, "w") as fh:
        fh.write(_field_text(u, alpha=alpha, rho=rho, extra_header=extra_header))


def _field_text(u: RadialField, *, alpha=None, rho=None, extra_header=None) -> str:
    buf = io.StringIO()
    buf.write(f"# n = {u.grid.n}\n")
    buf.write(f"# r_max = {u.grid.r_max!r}\n")
    if alpha is not None:
        buf.write(f"# alpha = {alpha!r}\n")
    if rho is not None:
        buf.write(f"# rho = {rho!r}\n")
    for key, val in (extra_header or {}).items():
        buf.write(f"# {key} = {val}\n")
    for r, v in zip(u.grid.nodes, u.values):
        buf.write(f"{float(r)!r} {float(v)!r}\n")
    return buf.getvalue()


def load_field(path) -> tuple[RadialField, dict]:
    """Read a field written by dump_field; returns (field, header dict)."""
    header: dict[str, str] = {}
    radii, vals = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            r_str, v_str = line.split()
            radii.append(float(r_str))
            vals.append(float(v_str))
    n = int(header.get("n", len(vals)))
    if n != len(vals):
        raise GridError(f"header n = {n} but file has {len(vals)} rows")
    r_max = float(header.get("r_max", 0.0))
    if r_max <= 0.0:
        raise GridError("missing or invalid r_max header")
    grid = build_grid(n, r_max)
    if not np.allclose(grid.nodes, radii, rtol=1e-12, atol=0.0):
        raise GridError("file radii are not a uniform cell-centered grid")
    return RadialField(grid, np.array(vals)), header
