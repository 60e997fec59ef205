"""Kinetic Monte Carlo for the boundary-driven symmetric simple exclusion process.

Rates are diffusively rescaled: every bond exchange fires at rate N^2/2,
site 1 is created at rate (N^2/2) alpha and annihilated at rate
(N^2/2)(1 - alpha), and likewise site N-1 with beta. Times are macroscopic.

Current convention: W[x] counts net jumps across bond {x, x+1},
x = 0..N-1. W[0] = creations at site 1 minus departures from site 1 to the
left reservoir; W[N-1] = departures from site N-1 to the right reservoir
minus arrivals from it. With this, eta_t(x) - eta_0(x) = W[x-1] - W[x].

Random streams: replica r of a run with seed s draws from
``numpy.random.Generator(PCG64(SeedSequence(s, spawn_key=(r,))))``. The
initial configuration is drawn first, then uniforms in blocks of
``BUFFER_SIZE``; two uniforms per attempted event (holding time, channel).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kmc
from .errors import ValidationError
from .pde import Grid, GridFunction, linear_profile, solve_heat
from .stats import MIN_BATCHES, batch_means

BUFFER_SIZE = 1 << 17
DEFAULT_BURN_IN = 10.0


@dataclass
class LatticeState:
    """Occupations of sites 1..N-1 (``eta[x - 1]`` is site x)."""

    eta: np.ndarray
    N: int
    alpha: float
    beta: float

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=np.int64)
        if self.N < 2:
            raise ValidationError("N must be at least 2")
        if self.eta.shape != (self.N - 1,):
            raise ValidationError(f"eta needs length N-1 = {self.N - 1}")
        if not np.all((self.eta == 0) | (self.eta == 1)):
            raise ValidationError("occupations must be 0 or 1")


@dataclass
class CurrentCounters:
    """Integrated bond currents; ``t`` is elapsed time in macroscopic units."""

    W: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.int64)


@dataclass
class SimParams:
    N: int
    alpha: float
    beta: float
    t_end: float
    seed: int = 0
    n_replicas: int = 1
    sample_interval: float = 0.1
    strict: bool = True
    debug: bool = False

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValidationError("; ".join(errors))
        if self.alpha > self.beta:
            warnings.warn("alpha > beta: signs follow through, but the usual convention is alpha <= beta",
                          stacklevel=2)

    def problems(self):
        out = []
        if int(self.N) != self.N or self.N < 2:
            out.append("N must be an integer >= 2")
        for key in ("alpha", "beta"):
            v = getattr(self, key)
            if self.strict and not 0 < v < 1:
                out.append(f"{key} must lie in (0,1)")
            elif not 0 <= v <= 1:
                out.append(f"{key} must lie in [0,1]")
        if not self.t_end > 0:
            out.append("t_end must be positive")
        if self.n_replicas < 1:
            out.append("n_replicas must be at least 1")
        if not self.sample_interval > 0:
            out.append("sample_interval must be positive")
        return out


def replica_rng(seed, r):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def exact_profile(N, alpha, beta):
    """Stationary mean occupation at sites 1..N-1."""
    x = np.arange(1, N)
    return alpha + x / N * (beta - alpha)


def exact_correlation(N, alpha, beta, x, y):
    """Stationary covariance of eta(x), eta(y) for 1 <= x < y <= N-1."""
    if x > y:
        x, y = y, x
    return -(beta - alpha) ** 2 / (N - 1) * (x / N) * (1 - y / N)


def initial_configuration(N, rng, profile):
    """Independent sites with P(eta(x) = 1) = profile(x/N)."""
    u = np.arange(1, N) / N
    p = np.clip(np.asarray(profile(u), dtype=float) * np.ones(N - 1), 0.0, 1.0)
    return (rng.random(N - 1) < p).astype(np.int64)


class _Replica:
    """Mutable simulator state for one replica, driven by the compiled loop."""

    def __init__(self, params, r, initial, track_pairs=False):
        N = params.N
        self.N, self.alpha, self.beta = N, float(params.alpha), float(params.beta)
        self.rng = replica_rng(params.seed, r)
        self.eta = np.zeros(N + 1, dtype=np.int64)
        if isinstance(initial, LatticeState):
            if initial.N != N:
                raise ValidationError("initial state has a different N")
            self.eta[1:N] = initial.eta
        else:
            self.eta[1:N] = initial_configuration(N, self.rng, initial)
        self.W = np.zeros(N, dtype=np.int64)
        self.P = _kmc.tree_size(N)
        self.tree = np.zeros(2 * self.P)
        _kmc.build_tree(self.tree, self.P, self.eta, N, self.alpha, self.beta)
        self.t = 0.0
        self.U = self.rng.random(BUFFER_SIZE)
        self.upos = 0
        self.track = track_pairs
        self.acc1 = np.zeros(N + 1)
        self.last1 = np.zeros(N + 1)
        shape = (N + 1, N + 1) if track_pairs else (1, 1)
        self.acc2 = np.zeros(shape)
        self.last2 = np.zeros(shape)
        self.eta0 = self.eta.copy()
        self.W0 = self.W.copy()
        self.check = params.debug
        self.n_events = 0

    def advance(self, t_stop):
        while True:
            t, upos, n, done = _kmc.run_until(
                self.eta, self.W, self.tree, self.P, self.N, self.alpha, self.beta,
                self.t, t_stop, self.U, self.upos, self.acc1, self.last1,
                self.acc2, self.last2, self.track, self.eta0, self.W0, self.check)
            self.t, self.upos = t, upos
            self.n_events += n
            if done:
                return
            self.U = self.rng.random(BUFFER_SIZE)
            self.upos = 0

    def reset_accumulators(self):
        self.acc1[:] = 0.0
        self.last1[:] = self.t
        self.acc2[:] = 0.0
        self.last2[:] = self.t

    def flush(self):
        _kmc.flush(self.eta, self.t, self.acc1, self.last1, self.acc2, self.last2,
                   self.track, self.N)

    def state(self):
        return LatticeState(self.eta[1:self.N].copy(), self.N, self.alpha, self.beta)

    def counters(self):
        return CurrentCounters(self.W.copy(), self.t)


@dataclass
class Trajectory:
    times: np.ndarray
    eta: np.ndarray      # (n_samples, N - 1)
    W: np.ndarray        # (n_samples, N)
    N: int
    alpha: float
    beta: float
    replica: int = 0
    n_events: int = 0

    def __len__(self):
        return self.times.size

    def snapshot(self, k):
        return (float(self.times[k]),
                LatticeState(self.eta[k], self.N, self.alpha, self.beta),
                CurrentCounters(self.W[k], float(self.times[k])))


def _resolve_initial(params, initial):
    if initial is None or (isinstance(initial, str) and initial == "stationary"):
        a, b = params.alpha, params.beta
        return lambda u: a * (1 - u) + b * u
    if isinstance(initial, (LatticeState, GridFunction)) or callable(initial):
        return initial
    raise ValidationError(f"unsupported initial condition {initial!r}")


def _map_replicas(fn, n, workers):
    if workers is None or workers <= 1 or n == 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves replica order: deterministic reduction
        return list(pool.map(fn, range(n)))


def simulate(params, initial=None, workers=None):
    """Run ``params.n_replicas`` independent replicas up to ``params.t_end``.

    ``initial`` is a LatticeState, a profile gamma (callable of u or a
    GridFunction; sites drawn independently with probability gamma(x/N)), or
    None for the linear profile between the reservoir densities. Snapshots
    are taken at t = 0, sample_interval, 2 sample_interval, ... <= t_end.
    """
    init = _resolve_initial(params, initial)
    n_samples = int(np.floor(params.t_end / params.sample_interval + 1e-9)) + 1
    sample_times = np.arange(n_samples) * params.sample_interval

    def one(r):
        rep = _Replica(params, r, init)
        etas = np.empty((n_samples, params.N - 1), dtype=np.int64)
        Ws = np.empty((n_samples, params.N), dtype=np.int64)
        for k, ts in enumerate(sample_times):
            if ts > rep.t:
                rep.advance(ts)
            etas[k] = rep.eta[1:params.N]
            Ws[k] = rep.W
        return Trajectory(sample_times.copy(), etas, Ws, params.N, params.alpha, params.beta,
                          r, rep.n_events)

    return _map_replicas(one, params.n_replicas, workers)


@dataclass
class StationaryStats:
    N: int
    alpha: float
    beta: float
    mean: np.ndarray            # sites 1..N-1
    mean_stderr: np.ndarray
    corr: np.ndarray            # (N-1, N-1) covariance estimates, NaN if not tracked
    corr_stderr: np.ndarray
    bond_current: np.ndarray    # W[x] / (N t) per bond
    bond_current_stderr: np.ndarray
    mean_current: float         # bond average of W / (N t)
    mean_current_stderr: float
    n_batches: int
    batch_time: float
    n_events: int = 0

    def correlation(self, x, y):
        """(estimate, stderr) for sites x, y (1-based)."""
        return float(self.corr[x - 1, y - 1]), float(self.corr_stderr[x - 1, y - 1])


def estimate_stationary(params, burn_in=DEFAULT_BURN_IN, batches_per_replica=MIN_BATCHES,
                        track_pairs=True, workers=None):
    """Time averages along stationary trajectories with batch-means error bars.

    Each replica starts from the product measure with the linear profile,
    runs ``burn_in`` macroscopic time, then splits [burn_in, t_end] into
    ``batches_per_replica`` equal batches. Occupation and pair integrals are
    exact time integrals of the piecewise-constant path.
    """
    n_batches = params.n_replicas * batches_per_replica
    if n_batches < MIN_BATCHES:
        raise ValidationError(
            f"need at least {MIN_BATCHES} batches in total, got {n_batches}")
    span = params.t_end - burn_in
    if span <= 0:
        raise ValidationError("t_end must exceed burn_in")
    batch_time = span / batches_per_replica
    N = params.N
    init = _resolve_initial(params, None)

    def one(r):
        rep = _Replica(params, r, init, track_pairs=track_pairs)
        rep.advance(burn_in)
        means = np.empty((batches_per_replica, N - 1))
        prods = np.empty((batches_per_replica, N - 1, N - 1)) if track_pairs else None
        currents = np.empty((batches_per_replica, N))
        for b in range(batches_per_replica):
            rep.reset_accumulators()
            W_start = rep.W.copy()
            rep.advance(burn_in + (b + 1) * batch_time)
            rep.flush()
            means[b] = rep.acc1[1:N] / batch_time
            if track_pairs:
                prods[b] = rep.acc2[1:N, 1:N] / batch_time
            currents[b] = (rep.W - W_start) / (N * batch_time)
        return means, prods, currents, rep.n_events

    results = _map_replicas(one, params.n_replicas, workers)
    means = np.concatenate([res[0] for res in results])
    currents = np.concatenate([res[2] for res in results])
    n_events = int(sum(res[3] for res in results))

    mean, mean_se = batch_means(means)
    bond, bond_se = batch_means(currents)
    avg, avg_se = batch_means(currents.mean(axis=1))

    n = N - 1
    corr = np.full((n, n), np.nan)
    corr_se = np.full((n, n), np.nan)
    if track_pairs:
        prods = np.concatenate([res[1] for res in results])
        # per-batch covariance estimates, upper triangle from the pair integrals
        cov_b = prods - means[:, :, None] * means[:, None, :]
        iu = np.triu_indices(n, 1)
        upper = cov_b[:, iu[0], iu[1]]
        c_mean, c_se = batch_means(upper)
        # pooled plug-in estimate; batch spread gives the error bar
        pooled = prods.mean(axis=0)[iu] - mean[iu[0]] * mean[iu[1]]
        corr[iu] = pooled
        corr[(iu[1], iu[0])] = pooled
        corr_se[iu] = c_se
        corr_se[(iu[1], iu[0])] = c_se
        diag, diag_se = batch_means(means * (1 - means))
        corr[np.diag_indices(n)] = mean * (1 - mean)
        corr_se[np.diag_indices(n)] = diag_se

    return StationaryStats(N, params.alpha, params.beta, mean, mean_se, corr, corr_se,
                           bond, bond_se, float(avg), float(avg_se), n_batches, batch_time,
                           n_events)


def empirical_observables(state, counters, M):
    """Bin the empirical density and integrated current onto M cells of [0, 1].

    Density: mass 1/N per particle at x/N, reported per unit length
    (bin mass * M). Current: N^-2 W[x] at x/N, also per unit length.
    """
    N = state.N
    if not 1 <= M <= N:
        raise ValidationError(f"need 1 <= M <= N, got M={M}, N={N}")
    grid = Grid(M)
    sites = np.arange(1, N)
    bins = np.minimum((sites * M) // N, M - 1)
    dens = np.bincount(bins, weights=state.eta / N, minlength=M) * M
    bonds = np.arange(N)
    cbins = np.minimum((bonds * M) // N, M - 1)
    cur = np.bincount(cbins, weights=counters.W / N**2, minlength=M) * M
    return (GridFunction(grid, dens, "density_bins", "cell"),
            GridFunction(grid, cur, "integrated_current", "cell"))


def pair_density(state, H):
    """<pi^N, H> = N^-1 sum_x H(x/N) eta(x)."""
    N = state.N
    u = np.arange(1, N) / N
    return float(np.sum(np.asarray(H(u)) * state.eta) / N)


def pair_current(counters, F):
    """<W^N_t, F> = N^-2 sum_x F(x/N) W[x], x = 0..N-1."""
    N = counters.W.size
    u = np.arange(N) / N
    return float(np.sum(np.asarray(F(u)) * counters.W) / N**2)


def hydrodynamic_discrepancy(params, gamma, H, M=200, dt=1e-4, workers=None):
    """Sup over sample times of |<pi^N_t, H> - <rho_t, H>|, averaged over replicas.

    ``gamma`` is a callable profile with gamma(0) = alpha, gamma(1) = beta;
    rho_t solves the heat equation from gamma. ``H`` is one test function or
    a sequence of them (e.g. bin indicators), in which case the sup also runs
    over the sequence. Returns (mean, stderr, per-replica values).
    """
    Hs_list = list(H) if isinstance(H, (list, tuple)) else [H]
    trajs = simulate(params, gamma, workers=workers)
    grid = Grid(M)
    g0 = GridFunction(grid, np.asarray(gamma(grid.nodes), dtype=float) * np.ones(M + 1))
    stride = int(round(params.sample_interval / dt))
    heat = solve_heat(g0, params.alpha, params.beta, stride * dt * (len(trajs[0]) - 1) or dt,
                      dt=dt, stride=stride)
    u = np.arange(1, params.N) / params.N
    macro = np.array([grid.integrate(heat.frames * np.asarray(f(grid.nodes), dtype=float))
                      for f in Hs_list])
    Hs = np.array([np.asarray(f(u), dtype=float) * np.ones(u.size) for f in Hs_list])
    sups = []
    for tr in trajs:
        micro = (tr.eta @ Hs.T).T / params.N
        k = min(micro.shape[1], macro.shape[1])
        sups.append(float(np.max(np.abs(micro[:, :k] - macro[:, :k]))))
    sups = np.array(sups)
    se = sups.std(ddof=1) / np.sqrt(sups.size) if sups.size > 1 else float("nan")
    return float(sups.mean()), float(se), sups
