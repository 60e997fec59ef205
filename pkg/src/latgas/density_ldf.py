"""Large-deviation functionals of the density.

Extended-real values: ``INFINITE`` (float +inf) is the sentinel for an
inadmissible argument. It is returned explicitly, never produced by
overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import xlogy

from .errors import NumericalFailure, ValidationError
from .models import Boundary
from .pde import GridFunction, SpaceTimePath

INFINITE = math.inf
CHI_FLOOR = 1e-12
SHOOT_RTOL = 1e-10
SHOOT_ATOL = 1e-13
TARGET_TOL = 1e-10
QUAD_REFINE = 4


def _bernoulli_entropy(g, r):
    return xlogy(g, g) - xlogy(g, r) + xlogy(1 - g, 1 - g) - xlogy(1 - g, 1 - r)


def free_energy_F0(gamma, rho_bar):
    """Local functional int gamma log(gamma/rho_bar) + (1-gamma) log((1-gamma)/(1-rho_bar)).

    Returns INFINITE if gamma touches 0 or 1 at an interior node.
    """
    g = gamma.values
    r = rho_bar.values
    if g.shape != r.shape:
        raise ValidationError("profiles live on different grids")
    inner = slice(None) if gamma.grid.periodic else slice(1, -1)
    if np.any(g[inner] <= 0) or np.any(g[inner] >= 1):
        return INFINITE
    if np.any((r <= 0) & (g > 0)) or np.any((r >= 1) & (g < 1)):
        return INFINITE
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = _bernoulli_entropy(g, r)
    return float(gamma.grid.integrate(integrand))


@dataclass
class FreeEnergySolution:
    gamma: GridFunction
    F: GridFunction
    dF: GridFunction
    value: float
    alpha: float
    beta: float
    residual: float
    iterations: int
    slope: float
    method: str
    bracket: list = field(default_factory=list)
    dense: Optional[Callable] = field(default=None, repr=False)

    @property
    def min_increment(self):
        return float(np.min(np.diff(self.F.values)))


def _spline(gamma):
    return CubicSpline(gamma.coords, gamma.values)


class _ScalarSpline:
    """Fast scalar evaluation of a CubicSpline on a uniform grid (ODE right-hand sides)."""

    def __init__(self, spline, M):
        self.c = [list(row) for row in spline.c.T]
        self.M = M

    def __call__(self, u):
        i = min(max(int(u * self.M), 0), self.M - 1)
        c3, c2, c1, c0 = self.c[i]
        x = u - i / self.M
        return ((c3 * x + c2) * x + c1) * x + c0


class _Shooter:
    def __init__(self, gspline, alpha, beta, M):
        self.g = _ScalarSpline(gspline, M)
        self.alpha = alpha
        self.beta = beta
        self.calls = 0

    def rhs(self, u, y):
        F = float(y[0])
        dF = float(y[1])
        return [dF, (self.g(u) - F) * dF * dF / (F * (1 - F))]

    def shoot(self, s, dense=False):
        """Integrate from F(0)=alpha, F'(0)=s. Returns (F(1), solution); F(1) is +inf on overshoot.

        An increasing solution stays in [alpha, beta], so leaving
        [alpha/2, (1+beta)/2] already decides the side of the shot and spares
        the stiff approach to F = 0 or 1.
        """
        self.calls += 1
        top = 0.5 * (1 + self.beta)
        bottom = 0.5 * self.alpha

        def hit_top(u, y):
            return y[0] - top
        hit_top.terminal = True

        def hit_bottom(u, y):
            return y[0] - bottom
        hit_bottom.terminal = True

        sol = solve_ivp(self.rhs, (0.0, 1.0), [self.alpha, s], method="DOP853",
                        rtol=SHOOT_RTOL, atol=SHOOT_ATOL, events=(hit_top, hit_bottom),
                        dense_output=dense)
        if sol.status == 1:
            if sol.t_events[0].size:
                return math.inf, sol
            return -math.inf, sol
        if sol.status != 0:
            return math.nan, sol
        return float(sol.y[0, -1]), sol


def _bvp_residual(dense, gspline, nodes, step=1e-3):
    """Sup over nodes of |F'' - (gamma - F) F'^2 / (F (1 - F))|.

    F'' is a fourth-order central difference of the continuous F' returned by
    the solver, so the check does not reuse the right-hand side.
    """
    dFp = [dense(nodes + k * step)[1] for k in (-2, -1, 1, 2)]
    F2 = (dFp[0] - 8 * dFp[1] + 8 * dFp[2] - dFp[3]) / (12 * step)
    F, dF = dense(nodes)
    return float(np.max(np.abs(F2 - (gspline(nodes) - F) * dF**2 / (F * (1 - F)))))


def _quadrature_value(dense, gspline, alpha, beta, M):
    """Composite Simpson on a QUAD_REFINE-times finer grid than the profile's."""
    n = QUAD_REFINE * M
    u = np.linspace(0.0, 1.0, n + 1)
    F, dF = dense(u)
    g = np.clip(gspline(u), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = _bernoulli_entropy(g, F) + np.log(dF / (beta - alpha))
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return float(np.sum(w * f) / (3 * n))


def _continuation(gamma, alpha, beta, max_steps=32):
    """Collocation (scipy solve_bvp) with gamma_theta = rho_bar + theta (gamma - rho_bar)."""
    u = gamma.coords
    rho_bar = alpha * (1 - u) + beta * u
    mesh = np.linspace(0.0, 1.0, 101)
    y = np.vstack([alpha * (1 - mesh) + beta * mesh, np.full_like(mesh, beta - alpha)])
    theta, dtheta, steps = 0.0, 1.0 / 8, 0
    sol = None
    while theta < 1.0:
        if steps >= max_steps:
            raise NumericalFailure("continuation exhausted its step budget",
                                   {"theta": theta, "steps": steps})
        target = min(1.0, theta + dtheta)
        gs = CubicSpline(u, rho_bar + target * (gamma.values - rho_bar))

        def fun(x, Y, gs=gs):
            F, dF = Y
            return np.vstack([dF, (gs(x) - F) * dF**2 / (F * (1 - F))])

        def bc(ya, yb):
            return np.array([ya[0] - alpha, yb[0] - beta])

        trial = solve_bvp(fun, bc, mesh, y, tol=1e-9, max_nodes=200000)
        steps += 1
        if trial.success and np.all(trial.sol(mesh)[1] > 0):
            sol, theta = trial, target
            mesh = trial.x
            y = trial.y
            dtheta = min(2 * dtheta, 1.0 - theta) if theta < 1 else dtheta
        else:
            dtheta /= 2
    return sol, steps


def solve_F_bvp(gamma, alpha, beta):
    """Increasing solution of F'' = (gamma - F) F'^2 / (F (1 - F)), F(0)=alpha, F(1)=beta.

    Shooting on s = F'(0) with an adaptive eighth-order integrator. The map
    s -> F(1) is bracketed by doubling/halving from s = beta - alpha inside
    [1e-6, 1e3 (beta - alpha)], checked for monotonicity along the way, and
    solved with Brent's method. If the bracket is lost,
    falls back to collocation with continuation from the linear profile.
    The free energy is then computed by quadrature of
    gamma log(gamma/F) + (1-gamma) log((1-gamma)/(1-F)) + log(F'/(beta-alpha)).
    """
    if not 0 < alpha < 1 or not 0 < beta < 1:
        raise ValidationError("alpha, beta must lie in (0,1)")
    if alpha == beta:
        raise ValidationError("alpha == beta: use free_energy_F0 at equilibrium")
    if alpha > beta:
        raise ValidationError("solve_F_bvp expects alpha < beta")
    g = gamma.values
    if gamma.grid.periodic:
        raise ValidationError("solve_F_bvp needs a Dirichlet grid")
    if np.any(g[1:-1] <= 0) or np.any(g[1:-1] >= 1) or np.any(g < 0) or np.any(g > 1):
        raise ValidationError("gamma must lie in [0,1], away from 0 and 1 in the interior")

    gs = _spline(gamma)
    shooter = _Shooter(gs, alpha, beta, gamma.grid.M)
    lo, hi = 1e-6, (beta - alpha) * 1e3
    trace = []

    def F1(s):
        val = shooter.shoot(s)[0]
        trace.append((s, val))
        return val

    # expand from s = beta - alpha (exact for gamma = rho_bar) within [lo, hi]
    s0 = beta - alpha
    f0 = F1(s0)
    method = "shooting"
    dense = None
    slope = math.nan
    a = b = s0
    fa = fb = f0
    if abs(f0 - beta) <= TARGET_TOL:
        found = True
    elif f0 < beta:
        while fb < beta and b < hi:
            a, fa = b, fb
            b = min(hi, 2 * b)
            fb = F1(b)
            if fb < fa - 1e-12:
                raise NumericalFailure("shooting map s -> F(1) is not monotone", {"bracket": trace})
        found = fb >= beta
    else:
        while fa > beta and a > lo:
            b, fb = a, fa
            a = max(lo, a / 2)
            fa = F1(a)
            if fa > fb + 1e-12:
                raise NumericalFailure("shooting map s -> F(1) is not monotone", {"bracket": trace})
        found = fa <= beta
    if not found:
        method = "collocation"
    else:
        # shrink until the upper end stops overshooting, then Brent
        for _ in range(200):
            if np.isfinite(fb):
                break
            mid = 0.5 * (a + b)
            fm = F1(mid)
            if fm < fa - 1e-12:
                raise NumericalFailure("shooting map s -> F(1) is not monotone", {"bracket": trace})
            if fm > beta:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        if not (np.isfinite(fa) and np.isfinite(fb)):
            method = "collocation"
        elif abs(fa - beta) <= TARGET_TOL or abs(fb - beta) <= TARGET_TOL:
            slope = a if abs(fa - beta) <= abs(fb - beta) else b
        else:
            slope = brentq(lambda s: F1(s) - beta, a, b, xtol=1e-15,
                           rtol=4 * np.finfo(float).eps, maxiter=200)
        if method == "shooting":
            end, sol = shooter.shoot(slope, dense=True)
            if not abs(end - beta) <= TARGET_TOL:
                method = "collocation"
            else:
                dense = sol.sol

    iterations = shooter.calls
    if method == "collocation":
        sol, steps = _continuation(gamma, alpha, beta)
        iterations += steps
        dense = sol.sol
        slope = float(sol.sol(0.0)[1])

    nodes = gamma.coords
    F, dF = dense(nodes)
    F[0], F[-1] = alpha, beta
    if not np.all(np.diff(F) > 0) or np.any(dF <= 0):
        raise NumericalFailure("no increasing solution found", {"bracket": trace, "method": method})
    residual = _bvp_residual(dense, gs, nodes)
    value = _quadrature_value(dense, gs, alpha, beta, gamma.grid.M)
    return FreeEnergySolution(
        gamma=gamma,
        F=GridFunction(gamma.grid, F, "F"),
        dF=GridFunction(gamma.grid, dF, "dF"),
        value=value, alpha=alpha, beta=beta, residual=residual,
        iterations=iterations, slope=float(slope), method=method,
        bracket=trace, dense=dense)


def free_energy(gamma, alpha, beta):
    """Non-equilibrium free energy; the equilibrium case alpha == beta goes to F0."""
    if alpha == beta:
        rho_bar = GridFunction(gamma.grid, np.full(gamma.grid.n_nodes, float(alpha)))
        return free_energy_F0(gamma, rho_bar)
    return solve_F_bvp(gamma, alpha, beta).value


@dataclass
class RateEvaluation:
    path: SpaceTimePath
    H: Optional[SpaceTimePath]
    cost: float
    integrand: np.ndarray
    elliptic_residual: float = 0.0
    reason: str = ""


def _check_path_boundary(path, model, tol):
    geom = model.geometry
    if isinstance(geom, Boundary):
        if path.grid.periodic:
            raise ValidationError("boundary model with a periodic path")
        if (np.max(np.abs(path.frames[:, 0] - geom.alpha)) > tol
                or np.max(np.abs(path.frames[:, -1] - geom.beta)) > tol):
            raise ValidationError("path boundary values drift away from (alpha, beta)")
    elif not path.grid.periodic:
        raise ValidationError("periodic model with a Dirichlet path")


def rate_density(path, model, boundary_tol=1e-8):
    """Dynamical cost 1/2 int dt int du chi(lambda) (grad H)^2 of a smooth density path.

    Per slice the residual r = d_t lambda - div(D grad lambda) + div(chi E)
    fixes H through div(chi grad H) = -r with H = 0 at both ends (or H
    periodic). In one dimension this is a double quadrature: the flux
    g = chi grad H equals G + c with G = -int r, and c makes the increments
    of H sum to zero. Space: staggered sums; time: trapezoid.
    """
    _check_path_boundary(path, model, boundary_tol)
    grid = path.grid
    lam = path.frames
    h = grid.h
    if path.times.size < 2:
        raise ValidationError("path needs at least two frames")
    lam_mid = grid.mid(lam)
    chi_mid = np.asarray(model.chi(lam_mid), dtype=float) * np.ones_like(lam_mid)
    if np.any(chi_mid < CHI_FLOOR) or not model.contains(lam):
        return RateEvaluation(path, None, INFINITE, np.full(path.times.size, INFINITE),
                              reason="mobility vanishes along the path")

    dlam = np.gradient(lam, path.dt, axis=0, edge_order=2)
    D_mid = np.asarray(model.D(lam_mid), dtype=float) * np.ones_like(lam_mid)
    flux = -D_mid * grid.grad(lam)
    if model.has_field:
        flux = flux + chi_mid * np.asarray(model.E(grid.cells), dtype=float)
    if grid.periodic:
        r = dlam + grid.div(flux)
    else:
        r = dlam[:, 1:-1] + grid.div(flux)

    # g_j = g_{j-1} - h r_j, so G_j = -h sum_{i<=j} r_i with G_0 = 0
    G = np.zeros_like(chi_mid)
    if grid.periodic:
        G[:, 1:] = -h * np.cumsum(r[:, 1:], axis=1)
    else:
        G[:, 1:] = -h * np.cumsum(r, axis=1)
    inv = 1.0 / chi_mid
    c = -np.sum(G * inv, axis=1) / np.sum(inv, axis=1)
    g = G + c[:, None]
    dH = h * g * inv
    H = np.zeros_like(lam)
    if grid.periodic:
        H[:, 1:] = np.cumsum(dH[:, :-1], axis=1)
    else:
        H[:, 1:] = np.cumsum(dH, axis=1)
    integrand = 0.5 * h * np.sum(g * g * inv, axis=1)
    cost = float(trapezoid(integrand, dx=path.dt))

    # reconstructed div(chi grad H) against -r
    back = grid.div(chi_mid * grid.grad(H))
    scale = max(1.0, float(np.max(np.abs(r))))
    ell = float(np.max(np.abs(back + r))) / scale
    return RateEvaluation(path, SpaceTimePath(grid, path.times, H, "potential", "node"),
                          cost, integrand, ell)
