"""Quasi-potential of the boundary-driven exclusion process via the adjoint dynamics.

Pipeline: gamma -> increasing solution F of the free-energy BVP ->
phi = logit(F) -> heat flow F_t from F_0 = F -> density
rho_t = F_t + F_t (1 - F_t) F_t'' / (F_t')^2, which relaxes from gamma to
rho_bar under the adjoint hydrodynamics. Reversing rho_t in time gives the
optimal path from rho_bar to gamma, whose cost should equal the free energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .density_ldf import INFINITE, _spline, free_energy_F0, rate_density, solve_F_bvp
from .errors import NumericalFailure, ValidationError
from .models import Boundary, builtin_model
from .pde import GridFunction, SpaceTimePath, linear_profile, solve_heat

DEFAULT_T = 5.0
MAX_T = 40.0
RELAX_TOL = 1e-4
RECONSTRUCTION_TOL = 1e-3


def _fd_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative at offset 0."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.vander(offsets, n, increasing=True).T
    b = np.zeros(n)
    b[order] = math.factorial(order)
    return np.linalg.solve(A, b)


_C1 = _fd_weights([-2, -1, 0, 1, 2], 1)
_C2 = _fd_weights([-2, -1, 0, 1, 2], 2)
_L1 = _fd_weights([-1, 0, 1, 2, 3, 4], 1)
_L2 = _fd_weights([-1, 0, 1, 2, 3, 4], 2)


def derivatives4(F, h):
    """Fourth-order first and second derivatives at interior nodes 1..M-1.

    Works on the last axis; nodes 1 and M-1 use shifted six-point stencils.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[-1]
    d1 = np.empty(F.shape[:-1] + (n - 2,))
    d2 = np.empty_like(d1)
    d1[..., 1:-1] = sum(w * F[..., k: n - 4 + k] for k, w in enumerate(_C1)) / h
    d2[..., 1:-1] = sum(w * F[..., k: n - 4 + k] for k, w in enumerate(_C2)) / h**2
    left = F[..., 0:6]
    right = F[..., n - 6:][..., ::-1]
    d1[..., 0] = left @ _L1 / h
    d2[..., 0] = left @ _L2 / h**2
    d1[..., -1] = -(right @ _L1) / h
    d2[..., -1] = right @ _L2 / h**2
    return d1, d2


def discrete_mobility(gamma_values):
    """chi at cells as the logarithmic mean dgamma / dlogit(gamma).

    With this choice chi * grad(logit gamma) equals grad(gamma) exactly on the
    grid; cells with a flat profile fall back to chi of the midpoint.
    """
    g = np.asarray(gamma_values, dtype=float)
    dg = np.diff(g)
    dl = np.diff(logit(g))
    mid = 0.5 * (g[1:] + g[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = np.where(np.abs(dg) > 1e-10, dg / dl, mid * (1 - mid))
    return chi


def _check_gamma(gamma, alpha, beta):
    if gamma.grid.periodic:
        raise ValidationError("the quasi-potential pipeline needs a Dirichlet grid")
    g = gamma.values
    if np.any(g <= 0) or np.any(g >= 1):
        raise ValidationError("gamma must lie strictly inside (0,1)")
    tol = 1e-10
    if abs(g[0] - alpha) > tol or abs(g[-1] - beta) > tol:
        raise ValidationError("gamma must satisfy gamma(0)=alpha, gamma(1)=beta")


def solve_phi(gamma, alpha, beta, fsol=None):
    """phi = log(F/(1-F)) with F the increasing free-energy BVP solution."""
    if fsol is None:
        fsol = solve_F_bvp(gamma, alpha, beta)
    phi = logit(fsol.F.values)
    phi[0], phi[-1] = math.log(alpha / (1 - alpha)), math.log(beta / (1 - beta))
    return GridFunction(gamma.grid, phi, "phi")


def phi_equation_residual(fsol, step=1e-3):
    """Sup over nodes of |phi''/(phi')^2 + 1/(1+e^phi) - gamma|.

    phi' comes from the continuous solution; phi'' is a fourth-order central
    difference of phi'.
    """
    dense = fsol.dense
    nodes = fsol.gamma.coords

    def dphi(u):
        F, dF = dense(u)
        return dF / (F * (1 - F))

    d = [dphi(nodes + k * step) for k in (-2, -1, 1, 2)]
    d2 = (d[0] - 8 * d[1] + 8 * d[2] - d[3]) / (12 * step)
    F, _ = dense(nodes)
    p1 = dphi(nodes)
    phi = logit(F)
    g = _spline(fsol.gamma)(nodes)
    return float(np.max(np.abs(d2 / p1**2 + 1 / (1 + np.exp(phi)) - g)))


@dataclass
class HJResidual:
    total: float
    gradient_term: float
    laplacian_term: float


def _hj_terms(gamma, dW):
    grid = gamma.grid
    h = grid.h
    g = gamma.values
    chi = discrete_mobility(g)
    gW = grid.grad(dW)
    A = float(h * np.sum(chi * gW**2))
    lap = grid.div(grid.grad(g))
    B = float(h * np.sum(dW[1:-1] * lap))
    return HJResidual(A + B, A, B)


def hamilton_jacobi_residual(gamma, alpha, beta, fsol=None):
    """<grad dW, chi grad dW> + <dW, Laplacian gamma> with dW = logit(gamma) - phi(gamma)."""
    _check_gamma(gamma, alpha, beta)
    phi = solve_phi(gamma, alpha, beta, fsol).values
    dW = logit(gamma.values) - phi
    dW[0] = dW[-1] = 0.0
    return _hj_terms(gamma, dW)


def hamilton_jacobi_local_control(gamma, alpha, beta):
    """Same pairing with the local guess dW = logit(gamma) - logit(rho_bar)."""
    _check_gamma(gamma, alpha, beta)
    rb = linear_profile(gamma.grid, alpha, beta).values
    dW = logit(gamma.values) - logit(rb)
    dW[0] = dW[-1] = 0.0
    return _hj_terms(gamma, dW)


@dataclass
class AdjointSolution:
    gamma: GridFunction
    phi: GridFunction
    F_path: SpaceTimePath
    rho_path: SpaceTimePath
    optimal_path: SpaceTimePath
    fsol: object
    T: float
    relaxation_error: float
    reconstruction_error: float


def reconstruct_density(F_frames, h, alpha, beta):
    """rho = F + F (1 - F) F'' / (F')^2 per frame; returns (rho, 2nd-vs-4th-order spread)."""
    F = np.atleast_2d(F_frames)
    d1, d2 = derivatives4(F, h)
    Fi = F[:, 1:-1]
    rho = np.empty_like(F)
    rho[:, 0], rho[:, -1] = alpha, beta
    rho[:, 1:-1] = Fi + Fi * (1 - Fi) * d2 / d1**2
    # second-order estimate for the resolution guard
    c1 = (F[:, 2:] - F[:, :-2]) / (2 * h)
    c2 = (F[:, 2:] - 2 * Fi + F[:, :-2]) / h**2
    rho2 = Fi + Fi * (1 - Fi) * c2 / c1**2
    return rho, float(np.max(np.abs(rho2 - rho[:, 1:-1])))


def adjoint_path(gamma, alpha, beta, T=None, dt=None, fsol=None):
    """Adjoint relaxation from gamma and its time reversal (the optimal fluctuation path).

    ``T`` defaults to 5 and doubles (up to 40) until sup |F_T - rho_bar| <= 1e-4;
    an explicit T is used as given and only checked. ``dt`` defaults to h/5.
    """
    _check_gamma(gamma, alpha, beta)
    grid = gamma.grid
    if dt is None:
        dt = grid.h / 5
    if fsol is None:
        fsol = solve_F_bvp(gamma, alpha, beta)
    phi = solve_phi(gamma, alpha, beta, fsol)
    F0 = GridFunction(grid, expit(phi.values), "F")
    rb = alpha * (1 - grid.nodes) + beta * grid.nodes

    auto = T is None
    T = DEFAULT_T if auto else float(T)
    while True:
        n = max(1, int(round(T / dt)))
        F_path = solve_heat(F0, alpha, beta, n * dt, dt=dt)
        relax = float(np.max(np.abs(F_path.frames[-1] - rb)))
        if relax <= RELAX_TOL or not auto or 2 * T > MAX_T:
            break
        T *= 2
    if relax > RELAX_TOL:
        raise NumericalFailure(f"T too small: sup|F_T - rho_bar| = {relax:.3g}",
                               {"T": T, "relaxation_error": relax})
    steps = np.diff(F_path.frames, axis=1)
    if np.any(steps <= 0):
        k = int(np.nonzero(np.any(steps <= 0, axis=1))[0][0])
        raise NumericalFailure("F_t lost strict monotonicity",
                               {"frame": k, "t": float(F_path.times[k])})
    rho, spread = reconstruct_density(F_path.frames, grid.h, alpha, beta)
    if spread > RECONSTRUCTION_TOL:
        raise NumericalFailure(
            f"density reconstruction under-resolved (2nd vs 4th order spread {spread:.3g})",
            {"spread": spread})
    if np.any(rho < 0) or np.any(rho > 1):
        raise NumericalFailure("reconstructed density left [0,1]")
    rho_path = SpaceTimePath(grid, F_path.times, rho, "density", "node")
    return AdjointSolution(gamma, phi, F_path, rho_path, rho_path.reversed(), fsol,
                           float(F_path.times[-1]), relax, spread)


@dataclass
class QuasiPotentialCheck:
    cost: float
    free_energy: float
    relative_gap: float
    T: float
    M: int


def verify_quasipotential(gamma, alpha, beta, T=None, dt=None):
    """Cost of the optimal path against the free energy of gamma.

    With alpha == beta the optimal path is the reversed heat relaxation and
    the free energy is the local functional F0.
    """
    grid = gamma.grid
    model = builtin_model("ssep", Boundary(alpha, beta))
    if alpha == beta:
        if dt is None:
            dt = grid.h / 5
        T = DEFAULT_T if T is None else float(T)
        relax = solve_heat(gamma, alpha, beta, round(T / dt) * dt, dt=dt)
        path = relax.reversed()
        value = free_energy_F0(gamma, GridFunction(grid, np.full(grid.n_nodes, float(alpha))))
        T = relax.duration
    else:
        adj = adjoint_path(gamma, alpha, beta, T, dt)
        path = adj.optimal_path
        value = adj.fsol.value
        T = adj.T
    cost = rate_density(path, model).cost
    gap = abs(cost - value) / value if value > 1e-12 else math.nan
    if cost == INFINITE:
        gap = math.inf
    return QuasiPotentialCheck(cost, value, gap, T, grid.M)


def adjoint_drift_consistency(gamma, alpha, beta, phi=None):
    """Sup-norm difference between two expressions of the adjoint drift D*(gamma).

    (i) from the adjoint equation: 1/2 Lap(gamma) - div(chi grad phi), with
        ``phi`` overridable (negative controls);
    (ii) from D + D* = div(chi grad dV): -1/2 Lap(gamma) + div(chi grad dW),
        dW = logit(gamma) - phi(gamma) with phi from the BVP.
    """
    _check_gamma(gamma, alpha, beta)
    grid = gamma.grid
    g = gamma.values
    chi = discrete_mobility(g)
    phi_true = solve_phi(gamma, alpha, beta).values
    phi_i = phi_true if phi is None else np.asarray(getattr(phi, "values", phi), dtype=float)
    lap = grid.div(grid.grad(g))
    route_i = 0.5 * lap - grid.div(chi * grid.grad(phi_i))
    dW = logit(g) - phi_true
    route_ii = -0.5 * lap + grid.div(chi * grid.grad(dW))
    return float(np.max(np.abs(route_i - route_ii)))
