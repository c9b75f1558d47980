"""Branch bookkeeping: sweeps, power-law fits, rescaled limit profiles,
threshold detection and the serialization formats."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpplab.branch import (
    BranchCurve,
    BranchRow,
    GridMismatchError,
    InsufficientDataError,
    SignChangeInWindowError,
    TailUnderresolvedError,
    curve_to_csv,
    decay_diagnostic,
    detect_thresholds,
    domain_for,
    fit_power_law,
    limit_profile_error,
    mass_radius,
    sidecar_payload,
    sweep,
)


def synthetic_curve(rhos, m_law, lam_law, kind="global-min", converged=True):
    rows = tuple(
        BranchRow(
            rho=r,
            m=m_law(r),
            lam=lam_law(r),
            A=1.0,
            B=1.0,
            C=1.0,
            kind=kind,
            converged=converged,
        )
        for r in rhos
    )
    return BranchCurve(alpha=2.0, rows=rows, provenance="synthetic")


# ---------------------------------------------------------------------------
# curve container


def test_curve_rejects_nonincreasing_rho_within_a_kind():
    with pytest.raises(ValueError, match="strictly increasing"):
        synthetic_curve([1.0, 2.0, 2.0], lambda r: -r, lambda r: r)


def test_curve_allows_equal_rho_across_kinds():
    rows = (
        BranchRow(1.0, -1.0, 1.0, 1, 1, 1, "global-min", True),
        BranchRow(1.0, -0.5, 1.0, 1, 1, 1, "thomas-fermi", True),
    )
    curve = BranchCurve(2.0, rows, "x")
    assert len(curve.rows) == 2


def test_column_accessor_maps_lambda_to_lam():
    curve = synthetic_curve([1.0, 2.0], lambda r: -r, lambda r: 3 * r)
    assert np.allclose(curve.column("lambda"), [3.0, 6.0])
    assert np.allclose(curve.column("m"), [-1.0, -2.0])


# ---------------------------------------------------------------------------
# power-law fits


@settings(max_examples=50, deadline=None)
@given(
    exponent=st.floats(-6.0, 6.0).filter(lambda p: abs(p) > 1e-2),
    prefactor=st.floats(1e-6, 1e6),
    negate=st.booleans(),
)
def test_fit_recovers_exact_power_laws(exponent, prefactor, negate):
    sign = -1.0 if negate else 1.0
    rhos = np.geomspace(0.5, 32.0, 7)
    curve = synthetic_curve(
        rhos,
        m_law=lambda r: sign * prefactor * r**exponent,
        lam_law=lambda r: r,
    )
    fit = fit_power_law(curve, "m", (0.4, 40.0))
    assert fit.exponent == pytest.approx(exponent, abs=1e-9)
    assert fit.prefactor == pytest.approx(sign * prefactor, rel=1e-9)
    assert fit.r_squared > 1.0 - 1e-12


def test_fit_handles_constant_data():
    # flat column: exponent ~ 0; r_squared is meaningless there (no variance
    # to explain) and is not asserted
    curve = synthetic_curve([1.0, 2.0, 4.0, 8.0], lambda r: 17.0, lambda r: r)
    fit = fit_power_law(curve, "m", (0.5, 10.0))
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(17.0, rel=1e-12)


def test_fit_requires_four_converged_rows():
    curve = synthetic_curve([1.0, 2.0, 3.0], lambda r: -(r**4), lambda r: r**2)
    with pytest.raises(InsufficientDataError):
        fit_power_law(curve, "m", (0.5, 4.0))
    wide = synthetic_curve(
        [1.0, 2.0, 3.0, 4.0, 5.0], lambda r: -(r**4), lambda r: r**2
    )
    # window clips to three rows
    with pytest.raises(InsufficientDataError):
        fit_power_law(wide, "m", (2.5, 5.5))


def test_fit_ignores_unconverged_rows():
    curve = synthetic_curve(
        [1.0, 2.0, 3.0, 4.0], lambda r: -(r**4), lambda r: r**2, converged=False
    )
    with pytest.raises(InsufficientDataError):
        fit_power_law(curve, "m", (0.5, 5.0))


def test_fit_rejects_sign_changes_in_window():
    curve = synthetic_curve([1.0, 2.0, 3.0, 4.0], lambda r: r - 2.5, lambda r: r)
    with pytest.raises(SignChangeInWindowError):
        fit_power_law(curve, "m", (0.5, 5.0))


def test_fit_validates_column_name():
    curve = synthetic_curve([1.0, 2.0, 3.0, 4.0], lambda r: -r, lambda r: r)
    with pytest.raises(ValueError, match="column"):
        fit_power_law(curve, "rho", (0.5, 5.0))
    # "M" is an alias for the energy column
    fit = fit_power_law(curve, "M", (0.5, 5.0))
    assert fit.exponent == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# real sweep gates (shared alpha=2 ladder)


def test_ladder_rows_all_converge(ladder2):
    assert all(r.converged for r in ladder2.rows)
    assert all(r.lam > 0 for r in ladder2.rows)


def test_ladder_energy_decreasing_and_concave(ladder2):
    rho = ladder2.column("rho")
    m = ladder2.column("m")
    assert np.all(np.diff(m) < 0)
    slopes = np.diff(m) / np.diff(rho)
    assert np.all(np.diff(slopes) < 0)  # strictly concave in rho


def test_ladder_multiplier_increasing(ladder2):
    lam = ladder2.column("lambda")
    assert np.all(np.diff(lam) > 0)


def test_tf_sweep_scales_exactly(cfg):
    curve = sweep(2.0, [1.0, 2.0, 4.0], cfg, kinds=("thomas-fermi",), n=256)
    m = curve.column("m")
    lam = curve.column("lambda")
    assert all(r.converged for r in curve.rows)
    assert m[1] == pytest.approx(16.0 * m[0], rel=1e-9)
    assert m[2] == pytest.approx(256.0 * m[0], rel=1e-9)
    assert lam[1] == pytest.approx(4.0 * lam[0], rel=1e-9)
    assert np.all(lam > 0)


# ---------------------------------------------------------------------------
# limit profiles


def test_limit_profile_error_vanishes_against_itself(tf12):
    # rho is reconstructed as sqrt(rho2), so "exactly zero" is one ulp away
    assert limit_profile_error(tf12, tf12, "tf") < 1e-12


def test_limit_profile_error_checks_grids(cfg, tf12):
    from gpplab.riesz import cached_kernel
    from gpplab.grid import build_grid
    from gpplab.solvers import solve_tf

    other = solve_tf(2.0, cached_kernel(2.0, build_grid(256, 12.0)), cfg)
    with pytest.raises(GridMismatchError):
        limit_profile_error(other, tf12, "tf")


def test_limit_profile_error_validates_metric(tf12):
    with pytest.raises(ValueError, match="metric"):
        limit_profile_error(tf12, tf12, "tf", metric="sup")


def test_mountain_pass_profiles_approach_the_hat_state(mp_pack):
    v0 = mp_pack["v0"]
    e40 = limit_profile_error(mp_pack[40.0], v0, "mp-type2", metric="h1")
    e80 = limit_profile_error(mp_pack[80.0], v0, "mp-type2", metric="h1")
    assert 0 < e80 < e40


def test_mountain_pass_fallback_relabeling_lands_on_the_hat_grid(mp_pack):
    res = mp_pack[40.0]
    extras = {k: v for k, v in res.extras.items() if k != "hat_state"}
    stripped = dataclasses.replace(res, extras=extras)
    err = limit_profile_error(stripped, mp_pack["v0"], "mp-type2", alpha=0.5)
    assert math.isfinite(err) and err > 0


# ---------------------------------------------------------------------------
# thresholds


def test_threshold_ordering_below_critical_exponent(thresholds_half):
    rep = thresholds_half
    assert rep.rho_star_critical is None
    assert rep.rho_doublestar_lower is not None
    assert rep.rho_doublestar_empirical is not None
    assert rep.rho_doublestar_lower <= rep.rho_doublestar_empirical < rep.rho_star


def test_threshold_matches_critical_mass_at_alpha_one(thresholds_one, free_alpha1):
    rep = thresholds_one
    rho_star = free_alpha1.extras["rho_star"]
    assert rep.rho_star_critical == pytest.approx(rho_star, rel=1e-12)
    assert abs(rep.rho_star - rho_star) <= 1e-2 * rho_star
    assert rep.rho_doublestar_lower is None


# ---------------------------------------------------------------------------
# diagnostics


def test_mass_radius_recovers_the_tf_support(tf12):
    R = mass_radius(tf12, 1.0 - 1e-12)
    assert abs(R - math.pi) <= tf12.state.grid.h
    assert mass_radius(tf12, 0.2) < mass_radius(tf12, 0.5) < R
    with pytest.raises(ValueError):
        mass_radius(tf12, 1.5)


def test_decay_rate_matches_sqrt_lambda_for_short_range_kernels(spot_states):
    diag = decay_diagnostic(spot_states["a1-r1.2star"])
    assert diag.window_ok
    diag = decay_diagnostic(spot_states["a05-r40"])
    assert diag.window_ok
    assert diag.slope == pytest.approx(diag.sqrt_lambda, rel=0.25)


def test_decay_rate_is_depressed_by_the_long_range_potential(spot_states):
    # the Coulomb tail shifts the local rate below sqrt(lambda)
    diag = decay_diagnostic(spot_states["a2-r1"])
    assert diag.slope < diag.sqrt_lambda


def test_decay_diagnostic_rejects_compact_support(tf12):
    with pytest.raises(TailUnderresolvedError):
        decay_diagnostic(tf12)


# ---------------------------------------------------------------------------
# serialization


def test_csv_round_trip():
    curve = synthetic_curve(
        [1.0, 2.5], lambda r: -(r**4) / 3.0, lambda r: r**2 / 7.0
    )
    text = curve_to_csv(curve)
    lines = text.strip().split("\n")
    assert lines[0] == "alpha,rho,m,lambda,A,B,C,kind,converged"
    assert len(lines) == 3
    cells = lines[1].split(",")
    assert float(cells[0]) == 2.0
    assert float(cells[1]) == 1.0
    assert float(cells[2]) == -1.0 / 3.0  # 17 significant digits round-trip
    assert cells[7] == "global-min"
    assert cells[8] == "true"


def test_sidecar_payload_shape():
    curve = synthetic_curve([1.0, 2.0, 3.0, 4.0], lambda r: -(r**4), lambda r: r**2)
    fit = fit_power_law(curve, "m", (0.5, 5.0))
    payload = sidecar_payload(curve, fits={"m": fit})
    assert payload["alpha"] == 2.0
    assert payload["provenance"] == "synthetic"
    assert payload["n_rows"] == 4
    assert payload["n_converged"] == 4
    assert payload["fits"]["m"]["exponent"] == pytest.approx(4.0, abs=1e-9)
    assert payload["fits"]["m"]["window"] == [0.5, 5.0]


# ---------------------------------------------------------------------------
# domain policy


def test_domain_policy_spot_values():
    assert domain_for(2.0, 5.0, "thomas-fermi") == 12.0
    assert domain_for(0.5, 40.0, "mp-type2") == pytest.approx(0.010 * 40.0**4)
    assert domain_for(2.0, 1.0, "choquard-min") == 600.0
    # small supercritical masses spread like rho^(-2/(alpha-1))
    assert domain_for(2.0, 0.3, "global-min") == pytest.approx(600.0 / 0.09)
    # hints tighten the box but floors and ceilings always apply
    assert 12.0 <= domain_for(2.0, 8.0, "global-min", lam_hint=0.5) <= 600.0
    assert domain_for(1.0, 9.0, "global-min") == 60.0
