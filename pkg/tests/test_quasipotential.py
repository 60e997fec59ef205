import math

import numpy as np
import pytest
from scipy.special import expit, logit

from conftest import boundary_profile, random_smooth_profile
from latgas.density_ldf import solve_F_bvp
from latgas.errors import NumericalFailure, ValidationError
from latgas.pde import Grid, GridFunction, linear_profile
from latgas.quasipotential import (adjoint_drift_consistency, adjoint_path, derivatives4,
                                   discrete_mobility, hamilton_jacobi_local_control,
                                   hamilton_jacobi_residual, phi_equation_residual,
                                   reconstruct_density, solve_phi, verify_quasipotential)

A, B = 0.2, 0.8


def test_phi_reference_profile():
    rb = linear_profile(Grid(200), A, B)
    phi = solve_phi(rb, A, B)
    assert np.max(np.abs(phi.values - logit(rb.values))) < 1e-8
    assert phi.values[0] == pytest.approx(math.log(0.25), abs=1e-8)
    assert phi.values[-1] == pytest.approx(-math.log(0.25), abs=1e-8)
    assert phi.values[0] == pytest.approx(-1.38629, abs=1e-5)


def test_phi_equation_residual():
    gam = boundary_profile(200, A, B, 0.1)
    fsol = solve_F_bvp(gam, A, B)
    assert phi_equation_residual(fsol) <= 1e-5


def test_phi_round_trip():
    gam = boundary_profile(200, A, B, 0.1)
    fsol = solve_F_bvp(gam, A, B)
    phi = solve_phi(gam, A, B, fsol)
    assert np.max(np.abs(expit(phi.values) - fsol.F.values)) < 1e-10


def test_derivatives4_exact_on_quartics():
    M = 40
    u = np.linspace(0, 1, M + 1)
    f = 1 + u - 2 * u**2 + 3 * u**3 - u**4
    d1, d2 = derivatives4(f, 1 / M)
    ui = u[1:-1]
    assert np.allclose(d1, 1 - 4 * ui + 9 * ui**2 - 4 * ui**3, atol=1e-9)
    assert np.allclose(d2, -4 + 18 * ui - 12 * ui**2, atol=1e-7)


def test_discrete_mobility_chain_rule():
    g = boundary_profile(64, A, B, 0.1).values
    chi = discrete_mobility(g)
    assert np.allclose(chi * np.diff(logit(g)), np.diff(g), atol=1e-15)
    mid = 0.5 * (g[1:] + g[:-1])
    assert np.max(np.abs(chi - mid * (1 - mid))) < 1e-3


def test_hj_reference_is_zero():
    rb = linear_profile(Grid(200), A, B)
    r = hamilton_jacobi_residual(rb, A, B)
    assert abs(r.total) < 1e-10
    assert abs(r.gradient_term) < 1e-10 and abs(r.laplacian_term) < 1e-10


def test_hj_residual_small_and_refining():
    vals = []
    for M in (200, 400):
        gam = boundary_profile(M, A, B, 0.05, shape="bump")
        vals.append(abs(hamilton_jacobi_residual(gam, A, B).total))
    assert vals[0] <= 1e-4
    assert vals[1] < vals[0]


def test_hj_local_guess_is_negative_control():
    gam = boundary_profile(200, A, B, 0.1)
    good = abs(hamilton_jacobi_residual(gam, A, B).total)
    bad = abs(hamilton_jacobi_local_control(gam, A, B).total)
    assert bad > 100 * good and bad > 1e-3


def test_adjoint_reference_path_is_static():
    rb = linear_profile(Grid(100), A, B)
    sol = adjoint_path(rb, A, B)
    assert np.max(np.abs(sol.rho_path.frames - rb.values)) < 1e-8


def test_adjoint_path_invariants():
    gam = boundary_profile(200, A, B, 0.1)
    sol = adjoint_path(gam, A, B)
    rb = linear_profile(gam.grid, A, B).values
    assert np.all(np.diff(sol.F_path.frames, axis=1) > 0)
    assert sol.rho_path.frames.min() >= 0 and sol.rho_path.frames.max() <= 1
    assert np.max(np.abs(sol.rho_path.frames[0] - gam.values)) < 1e-6
    assert np.max(np.abs(sol.optimal_path.frames[0] - rb)) < 1e-4
    assert np.max(np.abs(sol.optimal_path.frames[-1] - gam.values)) < 1e-6
    assert sol.phi.values[0] == pytest.approx(logit(A), abs=1e-8)
    assert sol.phi.values[-1] == pytest.approx(logit(B), abs=1e-8)
    # heat flow contracts towards the stationary profile
    dist = np.max(np.abs(sol.F_path.frames - rb), axis=1)
    assert np.all(np.diff(dist) <= 1e-12)


def test_reconstruction_round_trip():
    """Reconstructed densities fed back through the BVP return the heat frames."""
    gam = boundary_profile(200, A, B, 0.1)
    sol = adjoint_path(gam, A, B)
    for k in (5, 40, 200):
        rho = GridFunction(gam.grid, sol.rho_path.frames[k])
        F = solve_F_bvp(rho, A, B).F.values
        assert np.max(np.abs(F - sol.F_path.frames[k])) < 1e-6


def test_reconstruction_of_linear_F():
    u = np.linspace(0, 1, 51)
    rho, spread = reconstruct_density(A + (B - A) * u, 1 / 50, A, B)
    assert np.allclose(rho, A + (B - A) * u, atol=1e-12)
    assert spread < 1e-12


def test_T_too_small_is_reported():
    gam = boundary_profile(100, A, B, 0.1)
    with pytest.raises(NumericalFailure, match="T too small"):
        adjoint_path(gam, A, B, T=0.05)


def test_T_auto_doubling():
    gam = boundary_profile(100, A, B, 0.1)
    sol = adjoint_path(gam, A, B)
    assert sol.T in (5.0, 10.0, 20.0, 40.0)
    assert sol.relaxation_error <= 1e-4


def test_periodic_grid_rejected():
    g = Grid(32, periodic=True)
    with pytest.raises(ValidationError):
        adjoint_path(GridFunction(g, np.full(32, 0.5)), A, B)


def test_quasipotential_identity_bump_profile():
    u_prof = boundary_profile(200, A, B, 0.05, shape="bump")
    chk = verify_quasipotential(u_prof, A, B, T=5)
    assert chk.relative_gap <= 1e-2


@pytest.mark.parametrize("bump,mode", [(0.1, 1), (-0.1, 2)])
def test_quasipotential_gap_refines(bump, mode):
    gaps = [verify_quasipotential(boundary_profile(M, A, B, bump, mode), A, B).relative_gap
            for M in (100, 200)]
    assert gaps[0] <= 1e-2
    assert gaps[1] < gaps[0]


def test_quasipotential_reference_profile():
    chk = verify_quasipotential(linear_profile(Grid(100), A, B), A, B)
    assert abs(chk.cost) < 1e-10 and abs(chk.free_energy) < 1e-10


def test_reversible_case():
    g = Grid(200)
    gam = GridFunction(g, 0.5 + 0.1 * (1 - (1 - 2 * g.nodes) ** 8))
    chk = verify_quasipotential(gam, 0.5, 0.5)
    assert chk.relative_gap <= 1e-2


def test_drift_consistency():
    gam = boundary_profile(200, A, B, 0.1)
    assert adjoint_drift_consistency(gam, A, B) <= 1e-6
    rb = linear_profile(Grid(200), A, B)
    assert adjoint_drift_consistency(rb, A, B) <= 1e-10


def test_drift_consistency_wrong_phi():
    gam = boundary_profile(200, A, B, 0.1)
    wrong = logit(linear_profile(gam.grid, A, B).values)
    assert adjoint_drift_consistency(gam, A, B, phi=wrong) > 1e-2


def test_random_profiles_identity(rng):
    for _ in range(2):
        gam = random_smooth_profile(rng, 200, A, B)
        assert verify_quasipotential(gam, A, B).relative_gap <= 1e-2
