import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import boundary_profile, random_smooth_profile
from latgas.density_ldf import (INFINITE, free_energy, free_energy_F0, rate_density,
                                solve_F_bvp)
from latgas.errors import ValidationError
from latgas.models import Boundary, builtin_model
from latgas.pde import Grid, GridFunction, SpaceTimePath, linear_profile, solve_heat

A, B = 0.2, 0.8
SSEP = builtin_model("ssep", Boundary(A, B))


def test_F0_zero_at_reference():
    g = Grid(100)
    rb = linear_profile(g, A, B)
    assert free_energy_F0(rb, rb) == 0.0


def test_F0_constant_closed_form():
    g = Grid(50)
    val = free_energy_F0(GridFunction(g, np.full(51, 0.6)), GridFunction(g, np.full(51, 0.5)))
    assert val == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8), abs=1e-12)
    assert val == pytest.approx(0.0201355, abs=1e-7)


def test_F0_refinement_oracle():
    # trapezoid error is ~5e-6 at M=200; the 1e-6 agreement needs M=1000
    vals = []
    for M in (1000, 10000):
        g = Grid(M)
        vals.append(free_energy_F0(GridFunction(g, np.full(M + 1, 0.5)), linear_profile(g, A, B)))
    assert abs(vals[0] - vals[1]) < 1e-6


def test_F0_infinite_when_touching_bounds():
    g = Grid(20)
    gam = np.full(21, 0.5)
    gam[7] = 0.0
    assert free_energy_F0(GridFunction(g, gam), linear_profile(g, A, B)) == INFINITE


def test_bvp_reference_profile():
    rb = linear_profile(Grid(200), A, B)
    sol = solve_F_bvp(rb, A, B)
    assert np.max(np.abs(sol.F.values - rb.values)) < 1e-8
    assert abs(sol.value) < 1e-8


def test_bvp_rejects_equal_reservoirs():
    g = Grid(32)
    with pytest.raises(ValidationError):
        solve_F_bvp(GridFunction(g, np.full(33, 0.5)), 0.5, 0.5)


def test_equilibrium_routes_to_local_functional():
    g = Grid(64)
    gam = GridFunction(g, 0.5 + 0.1 * np.sin(np.pi * g.nodes))
    assert free_energy(gam, 0.5, 0.5) == free_energy_F0(gam, GridFunction(g, np.full(65, 0.5)))


@pytest.mark.parametrize("bump,mode", [(0.1, 1), (-0.15, 1), (0.08, 2), (0.05, 3)])
def test_bvp_invariants_and_ordering(bump, mode):
    gam = boundary_profile(200, A, B, bump, mode)
    sol = solve_F_bvp(gam, A, B)
    assert sol.min_increment > 0
    assert abs(sol.F.values[0] - A) < 1e-8 and abs(sol.F.values[-1] - B) < 1e-8
    assert sol.residual <= 1e-6
    assert sol.value >= free_energy_F0(gam, linear_profile(gam.grid, A, B))
    assert sol.value > 0


def test_rate_heat_path_floor():
    gam = boundary_profile(200, A, B, 0.1)
    path = solve_heat(gam, A, B, 1.0)
    ev = rate_density(path, SSEP)
    assert 0 <= ev.cost <= 1e-6
    assert np.all(ev.H.frames[:, 0] == 0) and np.max(np.abs(ev.H.frames[:, -1])) < 1e-12
    assert ev.elliptic_residual < 1e-8


def test_rate_constant_path_linear_in_T():
    gam = boundary_profile(100, A, B, 0.1)
    costs = []
    for T in (0.5, 1.0):
        t = np.linspace(0, T, 11)
        path = SpaceTimePath(gam.grid, t, np.tile(gam.values, (11, 1)))
        costs.append(rate_density(path, SSEP).cost)
    assert costs[0] > 0
    assert costs[1] == pytest.approx(2 * costs[0], rel=1e-12)


def test_rate_reversible_onsager_machlup():
    g = Grid(200)
    gam = GridFunction(g, 0.5 + 0.1 * np.sin(np.pi * g.nodes))
    relax = solve_heat(gam, 0.5, 0.5, 5.0, dt=1e-3)
    cost = rate_density(relax.reversed(), builtin_model("ssep", Boundary(0.5, 0.5))).cost
    target = free_energy_F0(gam, GridFunction(g, np.full(201, 0.5)))
    assert cost == pytest.approx(target, rel=1e-2)


def test_rate_infinite_on_vanishing_mobility():
    g = Grid(32)
    u = g.nodes
    frame = A + (B - A) * u
    frame[10:14] = 0.0
    path = SpaceTimePath(g, [0, 0.1, 0.2], np.tile(frame, (3, 1)))
    assert rate_density(path, SSEP).cost == INFINITE


def test_rate_boundary_drift_rejected():
    g = Grid(32)
    frame = np.full(33, 0.5)
    path = SpaceTimePath(g, [0, 0.1], np.tile(frame, (2, 1)))
    with pytest.raises(ValidationError):
        rate_density(path, SSEP)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_rate_nonnegative(seed):
    rng = np.random.default_rng(seed)
    gam = random_smooth_profile(rng, 64, A, B)
    t = np.linspace(0, 0.2, 21)
    amp = rng.uniform(-0.05, 0.05)
    frames = gam.values + amp * np.outer(np.sin(3 * t), np.sin(np.pi * gam.grid.nodes))
    frames = np.clip(frames, 1e-3, 1 - 1e-3)
    frames[:, 0], frames[:, -1] = A, B
    assert rate_density(SpaceTimePath(gam.grid, t, frames), SSEP).cost >= 0


def test_free_energy_ordering_random_profiles(rng):
    for _ in range(10):
        gam = random_smooth_profile(rng, 100, A, B)
        sol = solve_F_bvp(gam, A, B)
        assert sol.value >= free_energy_F0(gam, linear_profile(gam.grid, A, B)) - 1e-12
