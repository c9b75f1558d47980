"""Shared solver artifacts.

The expensive objects (branch sweeps, mountain-pass solves, threshold
bisections) are session fixtures so the acceptance suite and the module tests
pay for each of them once.  Everything here is deterministic.
"""

import numpy as np
import pytest

from gpplab import (
    GppParams,
    SolverConfig,
    build_grid,
    detect_thresholds,
    minimize_normalized,
    solve_choquard_frequency,
    solve_choquard_mp,
    solve_mp_type2,
    solve_tf,
    sweep,
)
from gpplab.riesz import cached_kernel

N = 2048  # desk-scale resolution; identity gates are calibrated for it


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def tf12(cfg):
    """Thomas-Fermi mass-1 profile, alpha = 2, on the calibrated box."""
    grid = build_grid(N, 12.0)
    return solve_tf(2.0, cached_kernel(2.0, grid), cfg)


@pytest.fixture(scope="session")
def ladder2(cfg):
    """alpha = 2 ground-state branch over a 12-rung mass ladder."""
    rhos = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]
    return sweep(2.0, rhos, cfg, kinds=("global-min",), n=N)


@pytest.fixture(scope="session")
def free_alpha1(cfg):
    """Frequency-1 Choquard ground state at alpha = 1 (critical mass)."""
    grid = build_grid(N, 25.0)
    return solve_choquard_frequency(1.0, cached_kernel(1.0, grid), cfg)


@pytest.fixture(scope="session")
def spot_states(cfg, free_alpha1):
    """Converged minimizers at the four identity-suite points, on the boxes
    where truncation and h^2 kernel error balance."""
    rho_star = free_alpha1.extras["rho_star"]
    points = {
        "a2-r1": (2.0, 1.0, 600.0),
        "a2-r5": (2.0, 5.0, 32.0),
        "a1-r1.2star": (1.0, 1.2 * rho_star, 60.0),
        "a05-r40": (0.5, 40.0, 12.0),
        "a05-r80": (0.5, 80.0, 12.0),
    }
    out = {}
    for key, (alpha, rho, r_max) in points.items():
        grid = build_grid(N, r_max)
        out[key] = minimize_normalized(
            GppParams(alpha, rho), cached_kernel(alpha, grid), cfg
        )
    return out


@pytest.fixture(scope="session")
def mp_pack(cfg):
    """Mountain-pass objects at alpha = 1/2: the mass-1 Choquard MP profile
    v0 and the type-II states at rho = 40 and 80 (hat boxes coincide)."""
    n = 4096
    v0_grid = build_grid(n, 0.010)
    v0 = solve_choquard_mp(0.5, cached_kernel(0.5, v0_grid), cfg)
    out = {"v0": v0}
    for rho in (40.0, 80.0):
        grid = build_grid(n, 0.010 * rho**4)
        out[rho] = solve_mp_type2(GppParams(0.5, rho), cached_kernel(0.5, grid), cfg)
    return out


@pytest.fixture(scope="session")
def thresholds_half(cfg):
    return detect_thresholds(0.5, cfg, n=N)


@pytest.fixture(scope="session")
def thresholds_one(cfg):
    return detect_thresholds(1.0, cfg, n=N)
