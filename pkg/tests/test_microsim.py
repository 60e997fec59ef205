import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latgas.errors import ValidationError
from latgas.microsim import (CurrentCounters, LatticeState, SimParams, empirical_observables,
                             estimate_stationary, exact_correlation, exact_profile,
                             pair_current, pair_density, replica_rng, simulate)


def test_params_validation():
    with pytest.raises(ValidationError) as exc:
        SimParams(N=1, alpha=1.2, beta=0.5, t_end=-1)
    msg = str(exc.value)
    assert "N must" in msg and "alpha" in msg and "t_end" in msg
    SimParams(N=10, alpha=0.0, beta=1.0, t_end=1, strict=False)
    with pytest.raises(ValidationError):
        SimParams(N=10, alpha=0.0, beta=1.0, t_end=1)


def test_reversed_reservoirs_warn():
    with pytest.warns(UserWarning):
        SimParams(N=10, alpha=0.8, beta=0.2, t_end=1)


def test_lattice_state_invariants():
    with pytest.raises(ValidationError):
        LatticeState(np.array([0, 2, 1]), 4, 0.2, 0.8)
    with pytest.raises(ValidationError):
        LatticeState(np.array([0, 1]), 4, 0.2, 0.8)


def test_exact_formulas():
    assert exact_profile(50, 0.2, 0.8)[24] == pytest.approx(0.2 + 0.6 * 25 / 50)
    assert exact_correlation(10, 0, 1, 3, 6) == pytest.approx(-(1 / 9) * 0.3 * 0.4)
    assert exact_correlation(20, 0.2, 0.8, 5, 15) == pytest.approx(-0.0011842, abs=1e-7)


def test_replica_streams_distinct():
    a = replica_rng(7, 0).random(4)
    b = replica_rng(7, 1).random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, replica_rng(7, 0).random(4))


def test_reproducible_trajectories():
    p = SimParams(N=30, alpha=0.3, beta=0.7, t_end=0.5, seed=11, n_replicas=2)
    t1, t2 = simulate(p), simulate(p, workers=2)
    for a, b in zip(t1, t2):
        assert np.array_equal(a.eta, b.eta) and np.array_equal(a.W, b.W)
    assert not np.array_equal(t1[0].W, t1[1].W)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 25), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_conservation_identity(N, a, b, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = SimParams(N=N, alpha=a, beta=b, t_end=0.2, seed=seed, sample_interval=0.05,
                      debug=True)
    tr = simulate(p)[0]
    d_eta = tr.eta[-1] - tr.eta[0]
    flux = tr.W[-1][:-1] - tr.W[-1][1:]
    assert np.array_equal(d_eta, flux - (tr.W[0][:-1] - tr.W[0][1:]))


def test_two_sites_bernoulli():
    p = SimParams(N=2, alpha=0.5, beta=0.5, t_end=200, seed=1)
    st_ = estimate_stationary(p, burn_in=1, track_pairs=False)
    assert abs(st_.mean[0] - 0.5) <= 3 * st_.mean_stderr[0]


def test_too_few_batches():
    p = SimParams(N=5, alpha=0.5, beta=0.5, t_end=2, seed=1)
    with pytest.raises(ValidationError):
        estimate_stationary(p, burn_in=1, batches_per_replica=10)


def test_correlation_formula_small_lattice():
    p = SimParams(N=10, alpha=0.0, beta=1.0, t_end=1500, seed=5, strict=False)
    st_ = estimate_stationary(p, burn_in=5)
    c, se = st_.correlation(3, 6)
    assert abs(c - exact_correlation(10, 0, 1, 3, 6)) <= 3 * se
    assert c < 0


def test_equal_reservoirs_uncorrelated():
    p = SimParams(N=10, alpha=0.4, beta=0.4, t_end=800, seed=2)
    st_ = estimate_stationary(p, burn_in=5)
    iu = np.triu_indices(9, 1)
    z = st_.corr[iu] / st_.corr_stderr[iu]
    # 36 simultaneous comparisons: allow the expected handful of 3-sigma excursions
    assert np.mean(np.abs(z) <= 3) >= 0.9
    assert abs(np.mean(z)) < 1.0


def test_mean_current_is_half_density_drop():
    # bond rate N^2/2 gives W/(N t) -> (alpha - beta)/2
    p = SimParams(N=20, alpha=0.2, beta=0.8, t_end=600, seed=3)
    st_ = estimate_stationary(p, burn_in=5, track_pairs=False)
    assert abs(st_.mean_current - (-0.3)) <= 3 * st_.mean_current_stderr


def test_empirical_observables():
    N = 10
    empty = LatticeState(np.zeros(N - 1), N, 0.2, 0.8)
    W = np.arange(N) - 3
    d, c = empirical_observables(empty, CurrentCounters(W), 5)
    assert np.all(d.values == 0)
    assert c.grid.integrate(c.values, "cell") == pytest.approx(W.sum() / N**2)
    full = LatticeState(np.ones(N - 1), N, 0.2, 0.8)
    d, _ = empirical_observables(full, CurrentCounters(np.zeros(N)), 5)
    assert d.grid.integrate(d.values, "cell") == pytest.approx(0.9)
    with pytest.raises(ValidationError):
        empirical_observables(full, CurrentCounters(np.zeros(N)), 11)


def test_pairings():
    N = 10
    st_ = LatticeState(np.ones(N - 1), N, 0.2, 0.8)
    assert pair_density(st_, lambda u: np.ones_like(u)) == pytest.approx(0.9)
    W = np.full(N, 100)
    assert pair_current(CurrentCounters(W), lambda u: np.ones_like(u)) == pytest.approx(10.0)
