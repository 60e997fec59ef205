"""Cost of sustaining a time-averaged current and dynamical phase transitions.

U(q) = inf_rho 1/2 int (q + D(rho) rho' - chi(rho) E)^2 / chi(rho) du over
time-independent profiles, compared with traveling waves
rho_t(u) = rho_0(u - v t) on the ring. For a wave the continuity equation
gives w(u, t) = v rho_0(u - v t) + q - v m, so the cost per unit time is

    1/2 int_0^1 (v rho_0 + q - v m - J(rho_0))^2 / chi(rho_0) du,

a single-period profile integral (checked against the generic current
rate functional in ``traveling_wave_rate_check``).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .current_ldf import rate_current
from .errors import NumericalFailure, ValidationError
from .models import Boundary, Periodic
from .pde import Grid, GridFunction, SpaceTimePath

DEFAULT_M = 64
DEFAULT_K = 6
DEFAULT_TOL = 1e-6
GRAD_TOL = 1e-8
MAX_ITER = 100_000
TW_POINTS = 256
TW_STARTS = 8
BARRIER_ROUNDS = 5
BARRIER_START = 1e-3

UNIQUE, COEXISTENCE, TRAVELING = "unique-phase", "coexistence", "traveling-wave"


# fixed-profile functional

def _cell_terms(model, grid, rho, q):
    """Residual r = q + D s - chi E per cell and the pieces of its derivatives."""
    a = rho
    b = np.roll(rho, -1)[: grid.M] if grid.periodic else rho[1:]
    a = a[: grid.M]
    s = (b - a) / grid.h
    rm = 0.5 * (a + b)
    D = np.asarray(model.D(rm), dtype=float) * np.ones_like(rm)
    chi = np.asarray(model.chi(rm), dtype=float) * np.ones_like(rm)
    E = np.asarray(model.E(grid.cells), dtype=float) * np.ones_like(rm) if model.has_field \
        else np.zeros_like(rm)
    r = q + D * s - chi * E
    return s, rm, D, chi, E, r


def profile_cost(rho, q, model, grid):
    """Discrete 1/2 sum_cells h (q + D grad rho - chi E)^2 / chi at the cell average."""
    _, _, _, chi, _, r = _cell_terms(model, grid, np.asarray(rho, dtype=float), q)
    if np.any(chi <= 0):
        return math.inf
    return float(0.5 * grid.h * np.sum(r * r / chi))


def profile_cost_gradient(rho, q, model, grid):
    """(value, gradient, Gauss-Newton Jacobian) of ``profile_cost`` w.r.t. all nodes."""
    rho = np.asarray(rho, dtype=float)
    h = grid.h
    s, rm, D, chi, E, r = _cell_terms(model, grid, rho, q)
    dD = np.asarray(model.D_prime(rm), dtype=float) * np.ones_like(rm)
    dchi = np.asarray(model.chi_prime(rm), dtype=float) * np.ones_like(rm)
    value = float(0.5 * h * np.sum(r * r / chi))
    A = h * (r / chi * (dD * s - dchi * E) - 0.5 * r * r * dchi / chi**2)
    S = h * r * D / chi
    n = rho.size
    M = grid.M
    left = np.arange(M)
    right = (left + 1) % n if grid.periodic else left + 1
    g = np.zeros(n)
    np.add.at(g, left, 0.5 * A - S / h)
    np.add.at(g, right, 0.5 * A + S / h)
    # residual vector R = sqrt(h) r / sqrt(chi), f = |R|^2 / 2
    sq = np.sqrt(chi)
    dR_dm = math.sqrt(h) * ((dD * s - dchi * E) / sq - 0.5 * r * dchi / chi**1.5)
    dR_ds = math.sqrt(h) * D / sq
    J = np.zeros((M, n))
    J[left, left] += 0.5 * dR_dm - dR_ds / h
    J[left, right] += 0.5 * dR_dm + dR_ds / h
    return value, g, J


@dataclass
class ProfileOptimum:
    q: float
    rho: GridFunction
    value: float
    iterations: int
    grad_norm: float
    constraint_residual: float
    converged: bool
    start: int = 0
    all_values: list = field(default_factory=list)


def _feasible(rho, model):
    lo, hi = model.density_range
    return bool(np.all(rho > lo) and np.all(rho < hi))


def _descend(rho, q, model, grid, free, tol=GRAD_TOL, max_iter=MAX_ITER):
    """Gauss-Newton preconditioned projected gradient descent with Armijo backtracking.

    ``free`` masks the unknowns; on the ring the total mass is held fixed
    through a Lagrange multiplier in the step equation.
    """
    rho = rho.copy()
    periodic = grid.periodic
    idx = np.nonzero(free)[0]
    n = idx.size
    mu = 1e-10
    f, g, J = profile_cost_gradient(rho, q, model, grid)
    gn = math.inf
    for it in range(1, max_iter + 1):
        gf = g[idx]
        if periodic:
            gf = gf - gf.mean()
        gn = float(np.max(np.abs(gf)))
        if gn <= tol:
            return rho, f, it - 1, gn, True
        Jf = J[:, idx]
        B = Jf.T @ Jf + mu * np.eye(n)
        if periodic:
            K = np.zeros((n + 1, n + 1))
            K[:n, :n] = B
            K[:n, n] = K[n, :n] = 1.0
            p = -np.linalg.solve(K, np.append(gf, 0.0))[:n]
        else:
            p = -np.linalg.solve(B, gf)
        slope = float(gf @ p)
        if slope >= 0:
            p, slope = -gf, -float(gf @ gf)
        step = 1.0
        while True:
            trial = rho.copy()
            trial[idx] += step * p
            if _feasible(trial, model):
                ft = profile_cost(trial, q, model, grid)
                if ft <= f + 1e-4 * step * slope:
                    break
            step *= 0.5
            if step < 1e-16:
                # no decrease available at double precision: stationary to roundoff
                return rho, f, it, gn, gn <= 1e3 * tol
        rho = trial
        f, g, J = profile_cost_gradient(rho, q, model, grid)
    return rho, f, max_iter, gn, False


def _initial_profiles(model, geometry, grid, seed):
    rng = np.random.default_rng(seed)
    lo, hi = model.density_range
    x = grid.nodes
    if isinstance(geometry, Periodic):
        m = geometry.mass
        base = np.full(grid.n_nodes, m)
        room = min(m - lo, hi - m)
        shapes = [np.cos(2 * np.pi * k * x + rng.uniform(0, 2 * np.pi)) for k in (1, 2, 3)]
    else:
        a, b = geometry.alpha, geometry.beta
        base = a + (b - a) * x
        room = min(min(a, b) - lo, hi - max(a, b))
        shapes = [np.sin(np.pi * k * x) for k in (1, 2, 3)]
    out = [base]
    for _ in range(2):
        coef = rng.normal(size=3) / np.arange(1, 4)
        pert = sum(c * s for c, s in zip(coef, shapes))
        pert *= 0.4 * room / max(np.max(np.abs(pert)), 1e-300)
        if isinstance(geometry, Periodic):
            pert -= pert.mean()
        out.append(base + pert)
    return out


def U_minimize(q, model, geometry=None, M=DEFAULT_M, seed=0, tol=GRAD_TOL, max_iter=MAX_ITER):
    """Minimize the fixed-profile cost of carrying the constant current q.

    Three starts: the constant (ring) or linear (boundary) profile and two
    random smooth perturbations of it. Best converged start is returned.
    """
    if not math.isfinite(q):
        raise ValidationError("q must be finite")
    geometry = geometry if geometry is not None else model.geometry
    if isinstance(geometry, Periodic):
        grid = Grid(M, periodic=True)
        free = np.ones(grid.n_nodes, dtype=bool)
    elif isinstance(geometry, Boundary):
        grid = Grid(M)
        free = np.ones(grid.n_nodes, dtype=bool)
        free[0] = free[-1] = False
    else:
        raise ValidationError("U_minimize needs a Boundary or Periodic geometry")
    model = model.with_geometry(geometry)
    results = []
    for k, rho0 in enumerate(_initial_profiles(model, geometry, grid, seed)):
        rho, f, it, gn, ok = _descend(rho0, q, model, grid, free, tol, max_iter)
        results.append((f, k, rho, it, gn, ok))
    conv = [r for r in results if r[5]]
    if not conv:
        best = min(results, key=lambda r: r[0])
        raise NumericalFailure(f"U_minimize did not converge (gradient norm {best[4]:.3g})",
                               {"q": q, "grad_norm": best[4], "iterations": best[3]})
    f, k, rho, it, gn, ok = min(conv, key=lambda r: (r[0], r[1]))
    if isinstance(geometry, Periodic):
        cres = abs(float(np.mean(rho)) - geometry.mass)
    else:
        cres = max(abs(rho[0] - geometry.alpha), abs(rho[-1] - geometry.beta))
    return ProfileOptimum(q, GridFunction(grid, rho, "density"), f, it, gn, cres, ok, k,
                          [r[0] for r in results])


def U_constant(q, m, model):
    """q^2 / (2 chi(m)), the cost of the constant profile on the ring."""
    chi = float(model.chi(m))
    if chi <= 0:
        raise ValidationError(f"chi({m}) = {chi} must be positive")
    return q * q / (2 * chi)


# traveling waves

class _Fourier:
    """rho_0 = m + sum_k a_k cos(2 pi k u) + b_k sin(2 pi k u) sampled on n points."""

    def __init__(self, K, n=TW_POINTS):
        self.K = K
        self.u = np.arange(n) / n
        k = np.arange(1, K + 1)
        ph = 2 * np.pi * np.outer(self.u, k)
        self.B = np.hstack([np.cos(ph), np.sin(ph)])
        w = 2 * np.pi * k
        self.dB = np.hstack([-w * np.sin(ph), w * np.cos(ph)])

    def eval(self, m, coef):
        return m + self.B @ coef, self.dB @ coef


def _wave_terms(model, q, m, v, rho, drho, u):
    D = np.asarray(model.D(rho), dtype=float) * np.ones_like(rho)
    chi = np.asarray(model.chi(rho), dtype=float) * np.ones_like(rho)
    E = np.asarray(model.E(u), dtype=float) * np.ones_like(rho) if model.has_field \
        else np.zeros_like(rho)
    r = v * rho + q - v * m + D * drho - chi * E
    return D, chi, E, r


def traveling_wave_cost(q, m, model, v, rho0):
    """Cost per unit time of the wave rho_0(u - v t) carrying mean current q.

    ``rho0`` is a periodic GridFunction (nodes) or a callable of u; callables
    are sampled on 256 points with a spectral derivative.
    """
    if isinstance(rho0, GridFunction):
        rho = rho0.values
        n = rho.size
        u = rho0.grid.nodes
    else:
        n = TW_POINTS
        u = np.arange(n) / n
        rho = np.asarray(rho0(u), dtype=float) * np.ones(n)
    freq = np.fft.rfftfreq(n, d=1.0 / n)
    drho = np.fft.irfft(2j * np.pi * freq * np.fft.rfft(rho), n)
    if abs(rho.mean() - m) > 1e-8:
        raise ValidationError(f"wave profile has mean {rho.mean():.10g}, expected {m}")
    _, chi, _, r = _wave_terms(model, q, m, v, rho, drho, u)
    if np.any(chi <= 0):
        return math.inf
    return float(0.5 * np.mean(r * r / chi))


@dataclass
class TravelingWaveOptimum:
    q: float
    m: float
    rho0: GridFunction
    v: float
    value: float
    K: int
    coef: np.ndarray = field(repr=False)
    start: int = 0
    all_values: list = field(default_factory=list)

    def profile(self, u):
        u = np.asarray(u, dtype=float)
        k = np.arange(1, self.K + 1)
        ph = 2 * np.pi * np.multiply.outer(u, k)
        return self.m + np.cos(ph) @ self.coef[: self.K] + np.sin(ph) @ self.coef[self.K:]


def _wave_objective(theta, q, m, model, basis, mu):
    v, coef = theta[0], theta[1:]
    rho, drho = basis.eval(m, coef)
    lo, hi = model.density_range
    if np.any(rho <= lo) or np.any(rho >= hi):
        return math.inf, None
    D, chi, E, r = _wave_terms(model, q, m, v, rho, drho, basis.u)
    if np.any(chi <= 0):
        return math.inf, None
    dD = np.asarray(model.D_prime(rho), dtype=float) * np.ones_like(rho)
    dchi = np.asarray(model.chi_prime(rho), dtype=float) * np.ones_like(rho)
    n = rho.size
    f = 0.5 * np.mean(r * r / chi)
    g_rho = (r / chi * (v + dD * drho - dchi * E) - 0.5 * r * r * dchi / chi**2) / n
    g_drho = r * D / chi / n
    g_v = float(np.sum(r * (rho - m) / chi)) / n
    if mu > 0:
        f -= mu * np.mean(np.log(rho - lo) + np.log(hi - rho))
        g_rho = g_rho - mu * (1 / (rho - lo) - 1 / (hi - rho)) / n
    grad = np.concatenate([[g_v], basis.B.T @ g_rho + basis.dB.T @ g_drho])
    return float(f), grad


def _bfgs(fun, x0, gtol=1e-10, max_iter=2000, stall=5):
    """BFGS with Armijo backtracking; infeasible trial points shrink the step.

    Stops on a relative gradient test, or after ``stall`` iterations without
    a decrease beyond roundoff. Deep backtracking resets the metric.
    """
    x = x0.copy()
    f, g = fun(x)
    if not math.isfinite(f):
        return x, f, False
    n = x.size
    Hinv = np.eye(n)
    flat = 0
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= gtol * max(1.0, abs(f)):
            return x, f, True
        p = -Hinv @ g
        slope = float(g @ p)
        if slope >= 0:
            Hinv = np.eye(n)
            p, slope = -g, -float(g @ g)
        step = 1.0
        halvings = 0
        while True:
            xt = x + step * p
            ft, gt = fun(xt)
            if math.isfinite(ft) and ft <= f + 1e-4 * step * slope:
                break
            step *= 0.5
            halvings += 1
            if step < 1e-14:
                return x, f, True
        s = xt - x
        y = gt - g
        sy = float(s @ y)
        if halvings > 10:
            Hinv = np.eye(n) * (sy / float(y @ y) if sy > 0 else 1.0)
        elif sy > 1e-300:
            rho_ = 1.0 / sy
            I = np.eye(n)
            Hinv = (I - rho_ * np.outer(s, y)) @ Hinv @ (I - rho_ * np.outer(y, s)) \
                + rho_ * np.outer(s, s)
        flat = flat + 1 if f - ft <= 1e-14 * max(1.0, abs(f)) else 0
        x, f, g = xt, ft, gt
        if flat >= stall:
            return x, f, True
    return x, f, False


def _wave_starts(q, m, model, K, n_starts, seed):
    rng = np.random.default_rng(seed)
    lo, hi = model.density_range
    room = min(m - lo, hi - m)
    starts = [np.zeros(2 * K + 1)]
    for _ in range(n_starts - 1):
        th = np.zeros(2 * K + 1)
        # small-amplitude analysis puts the best velocity near 2q/m
        th[0] = (2 * q / m) * rng.uniform(0.5, 1.5) * (1 if rng.random() < 0.8 else -1)
        amp = rng.uniform(0.1, 0.6) * room
        coef = rng.normal(size=2 * K) / np.tile(np.arange(1, K + 1), 2) ** 2
        rho, _ = _Fourier(K).eval(0.0, coef)
        coef *= amp / max(np.max(np.abs(rho)), 1e-300)
        th[1:] = coef
        starts.append(th)
    return starts


def traveling_wave_search(q, m, model, K=DEFAULT_K, n_starts=TW_STARTS, seed=0,
                          rounds=BARRIER_ROUNDS, mu0=BARRIER_START):
    """Minimize the wave cost over (v, a_k, b_k), k <= K, from ``n_starts`` starts.

    Feasibility is kept by a log barrier whose weight is divided by 10 in
    each of ``rounds`` rounds; the returned value is the barrier-free cost.
    The first start is the constant profile.
    """
    if K < 2:
        raise ValidationError("K must be at least 2")
    if n_starts < 1:
        raise ValidationError("need at least one start")
    model.chi(m)
    basis = _Fourier(K)
    results = []
    for k, th in enumerate(_wave_starts(q, m, model, K, n_starts, seed)):
        mu = mu0
        ok = True
        for _ in range(rounds):
            th, f, ok = _bfgs(lambda t: _wave_objective(t, q, m, model, basis, mu), th)
            if not math.isfinite(f):
                break
            mu /= 10
        th, f, ok = _bfgs(lambda t: _wave_objective(t, q, m, model, basis, 0.0), th)
        if math.isfinite(f):
            results.append((f, k, th))
    if not results:
        raise NumericalFailure("all traveling-wave starts infeasible", {"q": q, "m": m})
    f, k, th = min(results, key=lambda r: (r[0], r[1]))
    grid = Grid(TW_POINTS, periodic=True)
    rho, _ = basis.eval(m, th[1:])
    return TravelingWaveOptimum(q, m, GridFunction(grid, rho, "density"), float(th[0]), f, K,
                                th[1:].copy(), k, [r[0] for r in results])


def traveling_wave_rate_check(opt, model, M=256, steps_per_period=2000, periods=1.0):
    """Reduced wave cost against ``rate_current`` on a space-time grid.

    Returns (reduced, generic, relative difference); both are costs per unit
    time over ``periods`` periods of length 1/|v|.
    """
    reduced = traveling_wave_cost(opt.q, opt.m, model, opt.v, opt.profile)
    if abs(opt.v) < 1e-12:
        raise ValidationError("the wave does not move; no period to integrate over")
    P = periods / abs(opt.v)
    n = int(round(steps_per_period * periods))
    grid = Grid(M, periodic=True)
    times = np.linspace(0.0, P, n + 1)
    c = opt.q - opt.v * opt.m
    w = opt.v * opt.profile(grid.cells[None, :] - opt.v * times[:, None]) + c
    path = SpaceTimePath(grid, times, w, "current", "cell")
    gamma = GridFunction(grid, opt.profile(grid.nodes), "density")
    generic = rate_current(path, gamma, model).cost / P
    return reduced, generic, abs(generic - reduced) / max(abs(reduced), 1e-300)


# envelope and classification

def convex_envelope(q, U):
    """Lower convex hull of the points (q_i, U_i), evaluated on q."""
    q = np.asarray(q, dtype=float)
    U = np.asarray(U, dtype=float)
    if np.any(np.diff(q) <= 0):
        raise ValidationError("q grid must be strictly ascending")
    hull = []
    for i in range(q.size):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (q[i1] - q[i0]) * (U[i] - U[i0]) - (U[i1] - U[i0]) * (q[i] - q[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(q, q[hull], U[hull])


def classify(U, env, tw, tol=DEFAULT_TOL):
    """Label each q: traveling-wave, coexistence or unique-phase (relative tolerance)."""
    out = []
    for u, e, t in zip(U, env, tw):
        gap = tol * max(abs(u), 1e-12)
        if t is not None and math.isfinite(t) and t < u - gap:
            out.append(TRAVELING)
        elif e < u - gap:
            out.append(COEXISTENCE)
        else:
            out.append(UNIQUE)
    return out


@dataclass
class PhaseReport:
    q: np.ndarray
    U: np.ndarray
    traveling_wave: np.ndarray
    envelope: np.ndarray
    labels: list
    q_star: Optional[float]
    K: int
    m: Optional[float] = None
    velocity: Optional[np.ndarray] = None
    k_doubling: dict = field(default_factory=dict)

    def rows(self):
        for i in range(self.q.size):
            yield (float(self.q[i]), float(self.U[i]), float(self.envelope[i]),
                   float(self.traveling_wave[i]), self.labels[i])


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def phase_report(model, m, q_grid, K=DEFAULT_K, M=DEFAULT_M, tol=DEFAULT_TOL, seed=0,
                 n_starts=TW_STARTS, bisect_steps=8, workers=None,
                 U_func: Optional[Callable] = None, traveling_waves=True):
    """Phase diagram of the current cost on the ring of mass m.

    ``U_func`` replaces the fixed-profile minimization (used for synthetic
    cost curves); ``traveling_waves=False`` skips the wave search.
    """
    q = np.asarray(q_grid, dtype=float)
    if q.ndim != 1 or q.size < 2 or not np.all(np.isfinite(q)) or np.any(np.diff(q) <= 0):
        raise ValidationError("q_grid must be finite and strictly ascending with >= 2 points")
    geom = Periodic(m)
    model = model.with_geometry(geom)

    def U_at(qi):
        if U_func is not None:
            return float(U_func(qi))
        return U_minimize(qi, model, geom, M=M, seed=seed).value

    def tw_at(qi):
        if not traveling_waves:
            return None
        return traveling_wave_search(qi, m, model, K, n_starts, seed)

    U = np.array(_map(U_at, q, workers))
    waves = _map(tw_at, q, workers)
    tw = np.array([w.value if w is not None else np.nan for w in waves])
    vel = np.array([w.v if w is not None else np.nan for w in waves])
    env = convex_envelope(q, U)
    labels = classify(U, env, [None if w is None else w.value for w in waves], tol)

    q_star = None
    for i in range(q.size - 1):
        if labels[i] != labels[i + 1]:
            lo, hi = q[i], q[i + 1]
            if TRAVELING in (labels[i], labels[i + 1]) and traveling_waves:
                below = labels[i]
                for _ in range(bisect_steps):
                    mid = 0.5 * (lo + hi)
                    lab = classify([U_at(mid)], [np.inf], [tw_at(mid).value], tol)[0]
                    if lab == below:
                        lo = mid
                    else:
                        hi = mid
            q_star = 0.5 * (lo + hi)
            break

    k_doubling = {}
    if traveling_waves:
        gains = U - tw
        i = int(np.argmax(gains))
        if gains[i] > tol * max(U[i], 1e-12):
            w2 = traveling_wave_search(q[i], m, model, 2 * K, n_starts, seed)
            k_doubling = {"q": float(q[i]), "K": K, "value_K": float(tw[i]),
                          "value_2K": float(w2.value)}
    return PhaseReport(q, U, tw, env, labels, q_star, K, m, vel, k_doubling)
