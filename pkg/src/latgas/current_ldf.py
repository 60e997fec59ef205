"""Rate functional of the empirical current.

A current path w (instantaneous currents at cell centres) and an initial
profile gamma determine the density through the continuity equation; the
cost is 1/2 int dt int du (w - J(rho))^2 / chi(rho).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .density_ldf import CHI_FLOOR, INFINITE
from .errors import ValidationError
from .microsim import pair_current, simulate
from .pde import Grid, GridFunction, SpaceTimePath, solve_continuity, solve_heat


@dataclass
class CurrentRateEvaluation:
    w: SpaceTimePath
    density: SpaceTimePath
    cost: float
    integrand: np.ndarray
    reason: str = ""


def rate_current(w, gamma, model):
    """I(W | gamma) for a current path ``w`` stored at cells."""
    if w.grid != gamma.grid:
        raise ValidationError("current path and initial profile live on different grids")
    grid = w.grid
    rho = solve_continuity(gamma, w, model.density_range)
    n = w.times.size
    if not rho.meta["admissible"]:
        return CurrentRateEvaluation(w, rho, INFINITE, np.full(n, INFINITE),
                                     "induced density leaves the admissible range")
    rm = grid.mid(rho.frames)
    chi = np.asarray(model.chi(rm), dtype=float) * np.ones_like(rm)
    if np.any(chi < CHI_FLOOR):
        return CurrentRateEvaluation(w, rho, INFINITE, np.full(n, INFINITE),
                                     "mobility vanishes along the induced density")
    J = model.current(rm, grid.grad(rho.frames), grid.cells)
    dev = w.frames - J
    integrand = 0.5 * grid.h * np.sum(dev**2 / chi, axis=1)
    cost = float(trapezoid(integrand, dx=w.dt)) if n > 1 else 0.0
    return CurrentRateEvaluation(w, rho, cost, integrand)


def integrated_current(w):
    """W_t = int_0^t w_s ds by the trapezoid rule (same frames as w)."""
    W = np.zeros_like(w.frames)
    W[1:] = np.cumsum(0.5 * (w.frames[1:] + w.frames[:-1]), axis=0) * w.dt
    return SpaceTimePath(w.grid, w.times, W, "integrated_current", "cell")


@dataclass
class CurrentLLNReport:
    N: int
    T: float
    micro_mean: float
    micro_stderr: float
    macro: float
    bias: float
    mean_abs_discrepancy: float
    within_band: bool
    per_replica: np.ndarray = field(repr=False)


def current_lln_check(params, gamma, F=None, M=200, dt=1e-4, workers=None):
    """Compare <W^N_T, F> with -1/2 int_0^T int F grad(rho_t) on the heat solution.

    ``gamma`` is a callable profile with gamma(0)=alpha, gamma(1)=beta and
    ``F`` a smooth test function (default 1). The band is 3 standard errors
    of the replica mean (needs at least two replicas).
    """
    if F is None:
        F = lambda u: np.ones_like(np.asarray(u, dtype=float))  # noqa: E731
    T = params.t_end
    trajs = simulate(params, gamma, workers=workers)
    vals = np.array([pair_current(tr.snapshot(len(tr) - 1)[2], F) for tr in trajs])

    grid = Grid(M)
    g0 = GridFunction(grid, np.asarray(gamma(grid.nodes), dtype=float) * np.ones(M + 1))
    n = max(1, int(round(T / dt)))
    heat = solve_heat(g0, params.alpha, params.beta, n * dt, dt=T / n)
    Fc = np.asarray(F(grid.cells), dtype=float) * np.ones(M)
    slice_int = grid.h * (grid.grad(heat.frames) @ Fc)
    macro = float(-0.5 * trapezoid(slice_int, dx=heat.dt))

    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    bias = mean - macro
    return CurrentLLNReport(params.N, T, mean, se, macro, bias,
                            float(np.mean(np.abs(vals - macro))),
                            bool(vals.size > 1 and abs(bias) <= 3 * se), vals)
