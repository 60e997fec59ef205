"""Finite-difference solvers on [0, 1] with a staggered grid.

Densities (and F, phi, H) live at the nodes u_i = i/M; currents live at the
cell centres (i + 1/2)/M. With Dirichlet data there are M + 1 nodes, with
periodic data M nodes (node M is node 0). Cell j sits between nodes j and
j + 1, so the discrete gradient maps nodes to cells and the discrete
divergence maps cells back to (interior) nodes; the two are adjoint up to
boundary terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

from .errors import NumericalFailure, ValidationError
from .models import Boundary, Periodic

DEFAULT_M = 200
DEFAULT_DT = 2.5e-5
MIN_SOLVER_M = 16


@dataclass(frozen=True)
class Grid:
    M: int
    periodic: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise ValidationError(f"grid needs M >= 1, got {self.M}")

    @property
    def h(self):
        return 1.0 / self.M

    @property
    def nodes(self):
        n = self.M if self.periodic else self.M + 1
        return np.arange(n) / self.M

    @property
    def cells(self):
        return (np.arange(self.M) + 0.5) / self.M

    @property
    def n_nodes(self):
        return self.M if self.periodic else self.M + 1

    def coords(self, loc):
        return self.nodes if loc == "node" else self.cells

    # discrete operators

    def grad(self, f):
        """Node values -> cell values."""
        f = np.asarray(f, dtype=float)
        if self.periodic:
            return (np.roll(f, -1, axis=-1) - f) / self.h
        return (f[..., 1:] - f[..., :-1]) / self.h

    def div(self, g):
        """Cell values -> node values. Boundary grids return interior nodes only."""
        g = np.asarray(g, dtype=float)
        if self.periodic:
            return (g - np.roll(g, 1, axis=-1)) / self.h
        return (g[..., 1:] - g[..., :-1]) / self.h

    def mid(self, f):
        """Arithmetic average of neighbouring nodes, at cells."""
        f = np.asarray(f, dtype=float)
        if self.periodic:
            return 0.5 * (f + np.roll(f, -1, axis=-1))
        return 0.5 * (f[..., 1:] + f[..., :-1])

    def integrate(self, values, loc="node"):
        """Trapezoid on nodes (rectangle on a periodic grid), midpoint on cells."""
        values = np.asarray(values, dtype=float)
        if loc == "cell" or self.periodic:
            return self.h * np.sum(values, axis=-1)
        return self.h * (np.sum(values[..., 1:-1], axis=-1)
                         + 0.5 * (values[..., 0] + values[..., -1]))


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray
    kind: str = "density"
    loc: str = "node"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.n_nodes if self.loc == "node" else self.grid.M
        if self.values.shape != (expected,):
            raise ValidationError(
                f"{self.kind} on {self.loc}s needs shape ({expected},), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"{self.kind} values must be finite")

    @property
    def coords(self):
        return self.grid.coords(self.loc)

    def __call__(self, u):
        """Linear interpolation (periodic wrap on periodic grids)."""
        if self.grid.periodic:
            x = np.append(self.coords, self.coords[0] + 1.0)
            y = np.append(self.values, self.values[0])
            return np.interp(np.mod(u, 1.0), x, y)
        return np.interp(u, self.coords, self.values)

    def integral(self):
        return self.grid.integrate(self.values, self.loc)


def profile(grid, func, kind="density", loc="node"):
    return GridFunction(grid, np.asarray(func(grid.coords(loc)), dtype=float) * np.ones(
        grid.n_nodes if loc == "node" else grid.M), kind, loc)


def linear_profile(grid, alpha, beta):
    return profile(grid, lambda u: alpha * (1 - u) + beta * u)


@dataclass
class SpaceTimePath:
    grid: Grid
    times: np.ndarray
    frames: np.ndarray
    kind: str = "density"
    loc: str = "node"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 2 or self.frames.shape[0] != self.times.size:
            raise ValidationError("frames must be (n_times, n_points)")
        if self.times.size >= 2:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, steps[0]):
                raise ValidationError("path times must be uniformly spaced and increasing")

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    def frame(self, k):
        return GridFunction(self.grid, self.frames[k], self.kind, self.loc)

    def reversed(self):
        """Time reversal t -> T - t, keeping times ascending."""
        return SpaceTimePath(self.grid, self.times, self.frames[::-1].copy(),
                             self.kind, self.loc, dict(self.meta, reversed=True))


def require_resolution(grid):
    if grid.M < MIN_SOLVER_M:
        raise ValidationError(f"solvers need M >= {MIN_SOLVER_M}, got {grid.M}")


def _check_dirichlet(gamma, alpha, beta):
    tol = gamma.grid.h
    if abs(gamma.values[0] - alpha) > tol or abs(gamma.values[-1] - beta) > tol:
        raise ValidationError(
            f"initial profile boundary values ({gamma.values[0]:.6g}, {gamma.values[-1]:.6g})"
            f" do not match alpha={alpha}, beta={beta}")


def solve_heat(gamma, alpha, beta, T, dt=DEFAULT_DT, diffusivity=0.5, stride=1):
    """Crank-Nicolson for d_t rho = diffusivity * Laplacian(rho), Dirichlet data.

    Every ``stride``-th step is stored, so the returned path has time step
    ``stride * dt``.
    """
    grid = gamma.grid
    require_resolution(grid)
    if grid.periodic:
        raise ValidationError("solve_heat needs a Dirichlet grid")
    if dt <= 0 or T <= 0:
        raise ValidationError("T and dt must be positive")
    _check_dirichlet(gamma, alpha, beta)
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
        raise ValidationError(f"T={T} is not a multiple of dt={dt}")
    M, h = grid.M, grid.h
    r = diffusivity * dt / h**2
    n = M - 1
    # (I - r/2 A) x_new = (I + r/2 A) x_old + boundary terms; A = tridiag(1,-2,1)
    ab = np.zeros((2, n))
    ab[0, 1:] = -0.5 * r
    ab[1, :] = 1 + r
    chol = linalg.cholesky_banded(ab)
    bc = np.zeros(n)
    bc[0] = r * alpha
    bc[-1] = r * beta

    rho = gamma.values.copy()
    rho[0], rho[-1] = alpha, beta
    n_frames = n_steps // stride + 1
    frames = np.empty((n_frames, M + 1))
    frames[0] = rho
    x = rho[1:-1].copy()
    k = 1
    for step in range(1, n_steps + 1):
        rhs = (1 - r) * x
        rhs[1:] += 0.5 * r * x[:-1]
        rhs[:-1] += 0.5 * r * x[1:]
        rhs += bc
        x = linalg.cho_solve_banded((chol, False), rhs, check_finite=False)
        if step % stride == 0:
            frames[k, 0], frames[k, -1] = alpha, beta
            frames[k, 1:-1] = x
            k += 1
    times = np.arange(n_frames) * dt * stride
    return SpaceTimePath(grid, times, frames[:k], "density", "node")


def _hydro_step(model, grid, rho, dt, E_cells):
    """One linearised backward-Euler step; returns None if the result leaves the range."""
    h = grid.h
    rm = grid.mid(rho)
    a = np.asarray(model.D(rm), dtype=float) * np.ones_like(rm)
    drift = np.zeros_like(rm)
    if model.has_field:
        drift = np.asarray(model.chi(rm), dtype=float) * E_cells
    c = dt / h**2
    if grid.periodic:
        M = grid.M
        a_left = np.roll(a, 1)  # cell i-1 for node i
        main = 1 + c * (a_left + a)
        rhs = rho - dt * grid.div(drift)
        A = sparse.diags([main, -c * a[:-1], -c * a_left[1:]], [0, 1, -1], shape=(M, M), format="lil")
        A[M - 1, 0] = -c * a[M - 1]
        A[0, M - 1] = -c * a_left[0]
        new = splu(A.tocsc()).solve(rhs)
    else:
        n = grid.M - 1
        main = 1 + c * (a[:-1] + a[1:])
        ab = np.zeros((3, n))
        ab[0, 1:] = -c * a[1:-1]
        ab[1] = main
        ab[2, :-1] = -c * a[1:-1]
        rhs = rho[1:-1] - dt * grid.div(drift)
        rhs[0] += c * a[0] * rho[0]
        rhs[-1] += c * a[-1] * rho[-1]
        inner = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
        new = rho.copy()
        new[1:-1] = inner
    if not np.all(np.isfinite(new)) or not model.contains(new):
        return None
    return new


def solve_hydro(model, gamma, T, dt=DEFAULT_DT, stride=1, max_halvings=20):
    """d_t rho = div(D(rho) grad rho) - div(chi(rho) E), semi-implicit.

    Implicit in the diffusion (coefficients frozen at the old step), explicit
    in the drift. A step that leaves the density range is retried with dt
    halved, up to ``max_halvings`` times.
    """
    grid = gamma.grid
    require_resolution(grid)
    geom = model.geometry
    if isinstance(geom, Boundary):
        if grid.periodic:
            raise ValidationError("boundary model needs a Dirichlet grid")
        _check_dirichlet(gamma, geom.alpha, geom.beta)
    elif isinstance(geom, Periodic):
        if not grid.periodic:
            raise ValidationError("periodic model needs a periodic grid")
    else:
        raise ValidationError("model has no geometry")
    if dt <= 0 or T <= 0:
        raise ValidationError("T and dt must be positive")
    n_steps = int(round(T / dt))
    E_cells = np.asarray(model.E(grid.cells), dtype=float) * np.ones(grid.M)

    rho = gamma.values.copy()
    if isinstance(geom, Boundary):
        rho[0], rho[-1] = geom.alpha, geom.beta
    frames = [rho.copy()]
    min_dt = dt
    for step in range(1, n_steps + 1):
        remaining, sub = dt, dt
        while remaining > 1e-15 * dt:
            sub = min(sub, remaining)
            new = _hydro_step(model, grid, rho, sub, E_cells)
            halvings = 0
            while new is None:
                halvings += 1
                if halvings > max_halvings:
                    raise NumericalFailure(
                        f"density left the admissible range at t={(step - 1) * dt:.6g}"
                        f" after {max_halvings} step halvings",
                        {"t": (step - 1) * dt, "dt": sub})
                sub *= 0.5
                new = _hydro_step(model, grid, rho, sub, E_cells)
            min_dt = min(min_dt, sub)
            rho = new
            remaining -= sub
        if step % stride == 0:
            frames.append(rho.copy())
    times = np.arange(len(frames)) * dt * stride
    return SpaceTimePath(grid, times, np.array(frames), "density", "node", {"min_dt": min_dt})


def solve_continuity(gamma, w, density_range=(0.0, 1.0)):
    """Density path from d_t rho + div w = 0, rho_0 = gamma.

    Finite-volume update with the trapezoid rule in time:
    rho^{n+1} = rho^n - dt div((w^n + w^{n+1}) / 2). On a Dirichlet grid the
    boundary nodes keep the values of gamma. ``meta['admissible']`` is False
    when the density leaves ``density_range`` (closed) at any frame.
    """
    grid = gamma.grid
    if w.grid != grid:
        raise ValidationError("current path and initial profile live on different grids")
    if w.loc != "cell":
        raise ValidationError("current path must be stored at cell centres")
    dt = w.dt
    wbar = 0.5 * (w.frames[1:] + w.frames[:-1])
    increments = -dt * grid.div(wbar)
    frames = np.empty((w.times.size, grid.n_nodes))
    frames[0] = gamma.values
    if grid.periodic:
        frames[1:] = gamma.values + np.cumsum(increments, axis=0)
    else:
        frames[1:, 0] = gamma.values[0]
        frames[1:, -1] = gamma.values[-1]
        frames[1:, 1:-1] = gamma.values[1:-1] + np.cumsum(increments, axis=0)
    lo, hi = density_range
    admissible = bool(np.all(frames >= lo) and np.all(frames <= hi))
    return SpaceTimePath(grid, w.times.copy(), frames, "density", "node",
                         {"admissible": admissible})


def heat_current(path, diffusivity=0.5):
    """Instantaneous current -diffusivity * grad(rho) of every frame, at cells."""
    return SpaceTimePath(path.grid, path.times, -diffusivity * path.grid.grad(path.frames),
                         "current", "cell")


def model_current(path, model):
    """J(rho) = -D(rho) grad rho + chi(rho) E at cells, with rho averaged to the cell."""
    grid = path.grid
    rm = grid.mid(path.frames)
    J = model.current(rm, grid.grad(path.frames), grid.cells)
    return SpaceTimePath(grid, path.times, np.broadcast_to(J, rm.shape).copy(), "current", "cell")


def stationary_profile(model, M=DEFAULT_M, max_iter=100, max_damping=10, tol=1e-9):
    """Solve div(D(rho) grad rho - chi(rho) E) = 0 with Dirichlet data by damped Newton."""
    geom = model.geometry
    if not isinstance(geom, Boundary):
        raise ValidationError("stationary_profile needs Boundary geometry")
    grid = Grid(M)
    require_resolution(grid)
    h = grid.h
    E = np.asarray(model.E(grid.cells), dtype=float) * np.ones(M)
    rho = geom.alpha * (1 - grid.nodes) + geom.beta * grid.nodes

    def flux(r):
        rm = grid.mid(r)
        return model.current(rm, grid.grad(r), grid.cells) * np.ones(M)

    def residual(r):
        return grid.div(flux(r))

    res = residual(rho)
    history = [float(np.max(np.abs(res)))]
    for it in range(max_iter):
        if history[-1] <= tol:
            break
        rm = grid.mid(rho)
        g = grid.grad(rho)
        Dm = np.asarray(model.D(rm), dtype=float) * np.ones(M)
        dDm = np.asarray(model.D_prime(rm), dtype=float) * np.ones(M)
        dchim = np.asarray(model.chi_prime(rm), dtype=float) * np.ones(M)
        # d flux_j / d rho_j and d flux_j / d rho_{j+1}
        dfl = -0.5 * dDm * g + Dm / h + 0.5 * dchim * E
        dfr = -0.5 * dDm * g - Dm / h + 0.5 * dchim * E
        # residual at interior node i: (flux_i - flux_{i-1}) / h
        n = M - 1
        ab = np.zeros((3, n))
        ab[1] = (dfl[1:] - dfr[:-1]) / h
        ab[0, 1:] = dfr[1:-1] / h
        ab[2, :-1] = -dfl[1:-1] / h
        step = linalg.solve_banded((1, 1), ab, -res, check_finite=False)
        lam = 1.0
        for _ in range(max_damping + 1):
            trial = rho.copy()
            trial[1:-1] += lam * step
            if model.contains(trial):
                tres = residual(trial)
                if np.max(np.abs(tres)) < history[-1] or np.max(np.abs(tres)) <= tol:
                    break
            lam *= 0.5
        else:
            raise NumericalFailure("Newton damping exhausted in stationary_profile",
                                   {"residuals": history})
        rho, res = trial, tres
        history.append(float(np.max(np.abs(res))))
    if history[-1] > tol:
        raise NumericalFailure("Newton did not converge in stationary_profile",
                               {"residuals": history})
    out = GridFunction(grid, rho, "density", "node")
    return out
