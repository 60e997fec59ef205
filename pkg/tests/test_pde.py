import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latgas.errors import ValidationError
from latgas.models import Boundary, Periodic, builtin_model
from latgas.pde import (Grid, GridFunction, SpaceTimePath, heat_current, linear_profile,
                        model_current, solve_continuity, solve_heat, solve_hydro,
                        stationary_profile)


def sine_bump(M, a, b, amp=0.1):
    g = Grid(M)
    return GridFunction(g, a + (b - a) * g.nodes + amp * np.sin(np.pi * g.nodes))


def test_grid_basics():
    g = Grid(10)
    assert g.nodes.size == 11 and g.cells.size == 10 and g.h == 0.1
    p = Grid(10, periodic=True)
    assert p.nodes.size == 10
    f = np.sin(2 * np.pi * p.nodes)
    assert np.sum(p.div(p.grad(f))) == pytest.approx(0.0, abs=1e-10)


def test_grid_function_rejects_bad_values():
    g = Grid(16)
    with pytest.raises(ValidationError):
        GridFunction(g, np.zeros(5))
    with pytest.raises(ValidationError):
        GridFunction(g, np.full(17, np.nan))


def test_path_needs_uniform_times():
    g = Grid(16)
    with pytest.raises(ValidationError):
        SpaceTimePath(g, [0, 0.1, 0.3], np.zeros((3, 17)))


def test_solvers_need_resolution():
    g = Grid(8)
    with pytest.raises(ValidationError):
        solve_heat(GridFunction(g, np.full(9, 0.5)), 0.5, 0.5, 0.1)


def test_heat_stationary():
    g = Grid(64)
    rb = linear_profile(g, 0.2, 0.8)
    path = solve_heat(rb, 0.2, 0.8, 0.1, dt=1e-3)
    assert np.max(np.abs(path.frames - rb.values)) < 1e-13


def test_heat_sine_amplitude():
    gamma = sine_bump(200, 0.5, 0.5)
    path = solve_heat(gamma, 0.5, 0.5, 0.2)
    amp = path.frames[-1][100] - 0.5
    assert amp == pytest.approx(0.1 * math.exp(-math.pi**2 * 0.2 / 2), abs=1e-5)


def test_heat_relaxation():
    gamma = sine_bump(64, 0.2, 0.8, amp=0.15)
    path = solve_heat(gamma, 0.2, 0.8, 10.0, dt=1e-2, stride=100)
    rb = linear_profile(Grid(64), 0.2, 0.8).values
    assert np.max(np.abs(path.frames[-1] - rb)) < 1e-4


def test_heat_boundary_mismatch():
    with pytest.raises(ValidationError):
        solve_heat(sine_bump(32, 0.2, 0.8), 0.3, 0.8, 0.1)


def test_heat_refinement():
    errs = []
    for M, dt in ((32, 2e-3), (64, 1e-3)):
        path = solve_heat(sine_bump(M, 0.5, 0.5), 0.5, 0.5, 0.2, dt=dt)
        exact = 0.5 + 0.1 * math.exp(-math.pi**2 * 0.1) * np.sin(np.pi * Grid(M).nodes)
        errs.append(np.max(np.abs(path.frames[-1] - exact)))
    assert errs[0] / errs[1] >= 3


def test_hydro_matches_heat_for_ssep():
    gamma = sine_bump(64, 0.2, 0.8)
    model = builtin_model("ssep", Boundary(0.2, 0.8))
    h = solve_hydro(model, gamma, 0.2, dt=1e-4)
    c = solve_heat(gamma, 0.2, 0.8, 0.2, dt=1e-4)
    assert np.max(np.abs(h.frames[-1] - c.frames[-1])) < 1e-4


@pytest.mark.parametrize("model", [builtin_model("kmp", Periodic(1.5)),
                                   builtin_model("wasep", Periodic(0.3), E=1.0)])
def test_hydro_constant_is_stationary(model):
    g = Grid(32, periodic=True)
    m = model.geometry.mass
    path = solve_hydro(model, GridFunction(g, np.full(32, m)), 0.5, dt=1e-3)
    assert np.max(np.abs(path.frames - m)) < 1e-12


def test_hydro_periodic_mass_conservation():
    g = Grid(64, periodic=True)
    model = builtin_model("kmp", Periodic(1.0))
    gamma = GridFunction(g, 1.0 + 0.5 * np.sin(2 * np.pi * g.nodes))
    path = solve_hydro(model, gamma, 1.0, dt=1e-3)
    mass = g.integrate(path.frames)
    assert np.max(np.abs(mass - mass[0])) < 1e-12


def test_continuity_trivial_currents():
    g = Grid(32)
    gamma = sine_bump(32, 0.2, 0.8)
    times = np.linspace(0, 1, 11)
    for q in (0.0, 0.3):
        w = SpaceTimePath(g, times, np.full((11, 32), q), "current", "cell")
        rho = solve_continuity(gamma, w)
        assert np.max(np.abs(rho.frames - gamma.values)) < 1e-14


def test_continuity_reproduces_heat():
    gamma = sine_bump(100, 0.2, 0.8)
    heat = solve_heat(gamma, 0.2, 0.8, 0.2, dt=1e-3)
    rho = solve_continuity(gamma, heat_current(heat))
    assert np.max(np.abs(rho.frames - heat.frames)) < 1e-12


def test_continuity_flags_inadmissible():
    g = Grid(32)
    gamma = GridFunction(g, np.full(33, 0.5))
    w = SpaceTimePath(g, np.linspace(0, 1, 11), np.tile(np.sin(np.pi * g.cells) * 5, (11, 1)),
                      "current", "cell")
    assert not solve_continuity(gamma, w).meta["admissible"]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_continuity_discrete_conservation(coef):
    g = Grid(32, periodic=True)
    gamma = GridFunction(g, np.full(32, 0.5))
    t = np.linspace(0, 0.1, 6)
    w = sum(c * np.sin(2 * np.pi * (k + 1) * (g.cells[None, :] - t[:, None]))
            for k, c in enumerate(coef))
    rho = solve_continuity(gamma, SpaceTimePath(g, t, w, "current", "cell"), (-10, 10))
    assert np.max(np.abs(g.integrate(rho.frames) - 0.5)) < 1e-13


def test_stationary_profile_ssep():
    p = stationary_profile(builtin_model("ssep", Boundary(0.2, 0.8)), M=200)
    assert p(0.5) == pytest.approx(0.5, abs=1e-14)
    assert p(0.25) == pytest.approx(0.35, abs=1e-14)
    q = stationary_profile(builtin_model("ssep", Boundary(0.4, 0.4)), M=64)
    assert np.max(np.abs(q.values - 0.4)) < 1e-14


def test_stationary_profile_kmp():
    p = stationary_profile(builtin_model("kmp", Boundary(1.0, 2.0)), M=64)
    assert np.max(np.abs(p.values - (1 + p.grid.nodes))) < 1e-12


def test_model_current_ssep():
    gamma = sine_bump(64, 0.2, 0.8)
    path = solve_heat(gamma, 0.2, 0.8, 0.01, dt=1e-3)
    J = model_current(path, builtin_model("ssep", Boundary(0.2, 0.8)))
    assert np.allclose(J.frames, heat_current(path).frames)
