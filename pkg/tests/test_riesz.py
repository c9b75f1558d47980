"""Riesz kernel oracles.

The alpha = 2 kernel has elementary closed forms (Newton's theorem); general
alpha is checked against adaptive quadrature of the pointwise kernel and
against the Fourier-side Gaussian interaction integral
int (I_alpha * e^{-r^2}) e^{-r^2} = (pi/2) 2^{(1-alpha)/2} Gamma((3-alpha)/2).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from gpplab.grid import GridError, RadialField, build_grid, lp_norm
from gpplab.riesz import (
    C_STAR,
    apply_potential,
    build_kernel,
    cached_kernel,
    constants,
    interaction_bilinear,
    interaction_energy,
    kernel_value,
    riesz_normalization,
)


def newtonian_cells(grid):
    """Exact integral of s^2/max(r_i, s) over each cell."""
    r = grid.nodes[:, None]
    edges = grid.h * np.arange(grid.n + 1)
    lo, hi = edges[None, :-1], edges[None, 1:]
    below = (hi**3 - lo**3) / (3.0 * r)
    above = 0.5 * (hi**2 - lo**2)
    straddle = (r**3 - lo**3) / (3.0 * r) + 0.5 * (hi**2 - r**2)
    return np.where(hi <= r, below, np.where(lo >= r, above, straddle))


def test_normalization_closed_forms():
    assert riesz_normalization(2.0) == pytest.approx(1.0 / (4 * math.pi), rel=1e-15)
    assert riesz_normalization(1.0) == pytest.approx(1.0 / (2 * math.pi**2), rel=1e-15)


def test_newtonian_kernel_matches_exact_cell_integrals():
    grid = build_grid(512, 8.0)
    kern = build_kernel(2.0, grid)
    exact = newtonian_cells(grid)
    err = np.max(np.abs(kern.matrix - exact)) / np.max(exact)
    assert err < 1e-10  # roundoff-limited (cancellation in the assembly)


def test_uniform_ball_potential_newtons_theorem():
    # r_max/n chosen so the ball boundary is a cell edge; the row integrals
    # are then exact and the potential must match to roundoff.
    grid = build_grid(512, 8.0)
    kern = build_kernel(2.0, grid)
    r = grid.nodes
    phi = kern.matrix @ np.where(r <= 1.0, 1.0, 0.0)
    want = np.where(r <= 1.0, 0.5 * (1.0 - r**2 / 3.0), 1.0 / (3.0 * r))
    assert np.max(np.abs(phi - want) / want) < 1e-12


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.37, 2.0, 2.6])
def test_cell_integrals_match_adaptive_quadrature(alpha):
    grid = build_grid(64, 6.0)
    kern = build_kernel(alpha, grid)
    edges = grid.h * np.arange(grid.n + 1)
    for i in (0, 13, 40):
        r = grid.nodes[i]
        for j in (0, i, 12, 55):  # includes the singular diagonal cell
            ref, err = quad(
                lambda s: kernel_value(alpha, r, s) * s**2,
                edges[j],
                edges[j + 1],
                points=[r] if edges[j] < r < edges[j + 1] else None,
                limit=200,
            )
            assert kern.matrix[i, j] == pytest.approx(ref, rel=5e-9, abs=1e-14), (
                f"alpha={alpha}, cell ({i},{j})"
            )


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0, 2.5])
def test_gaussian_interaction_closed_form(alpha):
    grid = build_grid(2048, 12.0)
    u = RadialField(grid, np.exp(-(grid.nodes**2) / 2))
    got = interaction_energy(build_kernel(alpha, grid), u)
    want = (math.pi / 2) * 2 ** ((1 - alpha) / 2) * gamma((3 - alpha) / 2)
    assert got == pytest.approx(want, rel=2e-5)


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(0.1, 2.9),
    r=st.floats(0.05, 10.0),
    s=st.floats(0.05, 10.0),
)
def test_kernel_value_symmetry_and_positivity(alpha, r, s):
    if abs(r - s) < 1e-6:
        s = r + 0.1
    k_rs = kernel_value(alpha, r, s)
    assert k_rs > 0
    assert k_rs == pytest.approx(kernel_value(alpha, s, r), rel=1e-12)


def test_bilinear_form_symmetry_and_polarization():
    grid = build_grid(256, 10.0)
    kern = build_kernel(1.5, grid)
    rng = np.random.default_rng(0)
    f = RadialField(grid, rng.standard_normal(grid.n))
    g = RadialField(grid, rng.standard_normal(grid.n))
    b = interaction_bilinear(kern, f, g)
    assert b == interaction_bilinear(kern, g, f)  # exactly, by construction
    plus = RadialField(grid, f.values + g.values)
    minus = RadialField(grid, f.values - g.values)
    polar = 0.25 * (
        interaction_bilinear(kern, plus, plus) - interaction_bilinear(kern, minus, minus)
    )
    assert polar == pytest.approx(b, rel=1e-11, abs=1e-11)


def test_interaction_energy_nonnegative_on_noise():
    grid = build_grid(128, 5.0)
    kern = build_kernel(0.5, grid)
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = RadialField(grid, rng.standard_normal(grid.n))
        assert interaction_energy(kern, u) > 0


def test_apply_potential_requires_matching_grid():
    kern = build_kernel(2.0, build_grid(64, 4.0))
    other = RadialField(build_grid(64, 5.0), np.ones(64))
    with pytest.raises(GridError):
        apply_potential(kern, other)


def test_cached_kernel_identity_and_eviction():
    g = build_grid(32, 3.0)
    k1 = cached_kernel(1.25, g)
    assert cached_kernel(1.25, g) is k1
    for i in range(9):  # push more than the cache holds
        cached_kernel(1.25, build_grid(32, 4.0 + i))
    assert isinstance(cached_kernel(1.25, g), type(k1))


def test_hls_constant_saturates_on_the_extremal_family():
    # u = (1+r^2)^{-(3+alpha)/4} is the HLS extremal; D(u) must sit within
    # discretization error of c_alpha |u|_{12/(3+alpha)}^4 (the discrete
    # functionals can overshoot the continuum bound slightly).
    for alpha in (1.0, 2.0):
        grid = build_grid(2048, 100.0)
        u = RadialField(grid, (1 + grid.nodes**2) ** (-(3 + alpha) / 4))
        d = interaction_energy(build_kernel(alpha, grid), u)
        bound = constants(alpha).c_alpha_hls * lp_norm(u, 12 / (3 + alpha)) ** 4
        assert abs(d / bound - 1.0) < 5e-3, f"alpha={alpha}: ratio {d / bound}"


def test_gn_constant_value():
    assert C_STAR == pytest.approx((2 / math.pi) ** (2 / 3) / math.sqrt(3), rel=1e-15)
    c = constants(0.5)
    assert c.c_bar_gn == pytest.approx(C_STAR**0.75, rel=1e-15)
    assert c.c_barbar_alpha == pytest.approx(
        c.c_alpha_hls * c.c_bar_gn ** (4 - 4 * 0.5 / 3), rel=1e-14
    )
