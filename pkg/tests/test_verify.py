import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snfield import kernels as kz
from snfield import noise as nz
from snfield.dynamics import (ConstantDiffusion, ConstantGain, Ensemble, ModelSpec, SolverConfig, Trajectory,
                              solve_ensemble)
from snfield.grid import GridSpec, make_grid
from snfield.verify import (OffGridLag, empirical_covariance, holder_exponent, moment_supremum, ou_covariance,
                            pathwise_compare, picard_rate_check)


def grid(dim=1, L=10.0, n=256):
    return make_grid(GridSpec(dim, L, n))


def linear_model(g):
    return ModelSpec(kz.zero(g), ConstantGain(0.0), ConstantDiffusion(1.0))


# --- linear-model covariance oracle ----------------------------------------------

def test_ou_covariance_values():
    # dx = 1/16, indicator covariance is the triangle 1 - |r|
    phi = nz.indicator(grid(1, 8.0, 256))
    assert ou_covariance(phi, 0.0, 0.0) == 0.0
    assert ou_covariance(phi, 1.0, 0.0) == pytest.approx(0.4323323583816936, rel=1e-12)
    assert ou_covariance(phi, 1.0, 0.5) == pytest.approx(0.5 * 0.4323323583816936, rel=1e-12)
    assert ou_covariance(phi, 50.0, 0.0) == pytest.approx(0.5, rel=1e-14)
    assert abs(ou_covariance(phi, 1.0, 1.5)) < 1e-15


def test_ou_covariance_monotone_in_time_and_even_in_lag():
    phi = nz.gaussian_profile(grid())
    ts = np.linspace(0, 5, 21)
    vals = [ou_covariance(phi, t, 0.3125) for t in ts]
    assert np.all(np.diff(vals) > 0)
    for lag in (0.3125, 1.25, 3.125):
        assert ou_covariance(phi, 2.0, lag) == pytest.approx(ou_covariance(phi, 2.0, -lag), rel=1e-12)
    with pytest.raises(ValueError):
        ou_covariance(phi, -1.0, 0.0)


def test_off_grid_lag_warns():
    phi = nz.indicator(grid(1, 8.0, 256))
    with pytest.warns(OffGridLag):
        ou_covariance(phi, 1.0, 0.01)


@pytest.fixture(scope="module")
def linear_ensemble():
    g = grid(1, 8.0, 128)
    phi = nz.indicator(g)
    noise = nz.smoothed_white(phi, seed=17)
    ens = solve_ensemble(linear_model(g), SolverConfig(0.05, 2.0, n_paths=500, record_every=5), noise)
    return g, phi, ens


def test_empirical_covariance_matches_oracle(linear_ensemble):
    g, phi, ens = linear_ensemble
    rep = empirical_covariance(ens, 1.0, [0.0, 0.25, 0.5, 1.0], phi)
    assert rep.max_z < 4
    assert not rep.degenerate
    lag0 = np.mean((ens.at(1.0) - ens.at(1.0).mean(axis=0)) ** 2)
    assert rep.empirical[0] == pytest.approx(lag0, rel=1e-12)
    assert len(list(rep.rows())) == 4


def test_empirical_covariance_needs_paths(linear_ensemble):
    _, phi, ens = linear_ensemble
    small = Ensemble(ens.grid, ens.times, ens.states[:50])
    with pytest.raises(ValueError):
        empirical_covariance(small, 1.0, [0.0], phi)
    with pytest.raises(KeyError):
        empirical_covariance(ens, 1.01, [0.0], phi)


# --- Hoelder exponents -------------------------------------------------------------

def test_smooth_path_is_not_rough():
    t = np.linspace(0, 1, 201)
    x = grid(1, 10.0, 256).axis
    tr = np.sin(2 * t)[:, None] * np.cos(math.pi * x / 10.0)[None, :]
    et = holder_exponent(tr, "Time", dt=t[1])
    es = holder_exponent(tr, "Space", grid=grid(1, 10.0, 256))
    assert et.eta_hat >= 0.95 and not et.rough
    assert es.eta_hat >= 0.95 and not es.rough


def brownian(dt, steps, paths, seed):
    rng = np.random.default_rng(seed)
    w = np.cumsum(rng.normal(scale=math.sqrt(dt), size=(paths, steps, 1)), axis=1)
    return np.repeat(w, 8, axis=2)


@pytest.mark.parametrize("q", [2, 4])
def test_brownian_exponent_is_half(q):
    e = holder_exponent(brownian(0.01, 400, 200, 1), "Time", q=q, dt=0.01)
    assert abs(e.eta_hat - 0.5) < 0.05
    assert e.rough and e.fit_r2 > 0.99


def test_time_estimate_stable_under_refinement():
    a = holder_exponent(brownian(0.01, 400, 200, 2), "Time", dt=0.01).eta_hat
    b = holder_exponent(brownian(0.005, 800, 200, 3), "Time", dt=0.005).eta_hat
    assert abs(a - b) < 0.05


def test_linear_field_is_rough_in_time(linear_ensemble):
    g, phi, _ = linear_ensemble
    ens = solve_ensemble(linear_model(g), SolverConfig(0.01, 1.0, n_paths=100), nz.smoothed_white(phi, seed=5))
    e = holder_exponent(ens, "Time")
    assert abs(e.eta_hat - 0.5) < 0.05


def test_holder_errors():
    g = grid(1, 2.0, 16)
    with pytest.raises(ValueError):
        holder_exponent(np.zeros((20, 16)), "Time", dt=0.1)
    with pytest.raises(ValueError):
        holder_exponent(np.ones((20, 16)), "Time", q=3, dt=0.1)
    with pytest.raises(ValueError):
        holder_exponent(np.ones((4, 16)), "Time", dt=0.1)
    with pytest.raises(ValueError):
        holder_exponent(np.ones((20, 16)), "Space", grid=g)
    with pytest.raises(ValueError):
        holder_exponent(np.random.default_rng(0).normal(size=(20, 16)), "Space")


# --- moment suprema -----------------------------------------------------------------

def test_zero_model_has_zero_moments():
    g = grid(1, 2.0, 16)
    ens = solve_ensemble(ModelSpec(kz.zero(g), ConstantGain(0.0), ConstantDiffusion(0.0)),
                         SolverConfig(0.1, 1.0, n_paths=100), nz.smoothed_white(nz.indicator(g)))
    rep = moment_supremum(ens, 2)
    assert rep.value == 0.0 and rep.finite


@pytest.fixture(scope="module")
def long_linear():
    g = grid(1, 8.0, 128)
    phi = nz.indicator(g)
    ens = solve_ensemble(linear_model(g), SolverConfig(0.05, 5.0, n_paths=1000, record_every=50),
                         nz.smoothed_white(phi, seed=23))
    return ens, nz.analytic_covariance(phi).values[g.origin_index]


def test_linear_second_moment_bound(long_linear):
    ens, c0 = long_linear
    rep = moment_supremum(ens, 2, pool_space=True)
    v = c0 * (-math.expm1(-10.0)) / 2
    assert rep.value <= v + 4 * rep.mc_sigma
    assert abs(rep.value - v) / rep.mc_sigma < 4
    assert rep.finite


def test_linear_fourth_moment(long_linear):
    ens, c0 = long_linear
    rep = moment_supremum(ens, 4, pool_space=True)
    v = c0 * (-math.expm1(-10.0)) / 2
    assert abs(rep.value - 3 * v**2) / rep.mc_sigma < 4


def test_moments_follow_power_mean_order(long_linear):
    ens, _ = long_linear
    r = [moment_supremum(ens, p).value ** (1 / p) for p in (2, 4, 8)]
    assert r[0] <= r[1] <= r[2]


def test_growth_is_flagged():
    g = grid(1, 2.0, 16)
    t = np.linspace(0, 4, 9)
    rng = np.random.default_rng(0)
    states = rng.normal(size=(100, 1, 16)) * np.exp(t)[None, :, None]
    rep = moment_supremum(Ensemble(g, t, states), 2)
    assert not rep.finite
    rep = moment_supremum(Ensemble(g, t, states), 2, t_max=1.0)
    assert rep.argmax[0] <= 1.0


def test_moment_errors(long_linear):
    ens, _ = long_linear
    with pytest.raises(ValueError):
        moment_supremum(ens, 3)
    with pytest.raises(ValueError):
        moment_supremum(Ensemble(ens.grid, ens.times, ens.states[:10]), 2)


# --- pathwise comparison ----------------------------------------------------------------

def _traj(v):
    g = grid(1, 2.0, 16)
    return Trajectory(g, np.array([0.0, 1.0]), np.asarray(v).reshape(2, 16))


vec = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=32, max_size=32)


@settings(max_examples=40, deadline=None)
@given(vec, vec, vec)
def test_pathwise_compare_is_a_pseudometric(a, b, c):
    A, B, C = _traj(a), _traj(b), _traj(c)
    assert pathwise_compare(A, A) == 0.0
    assert pathwise_compare(A, B) == pathwise_compare(B, A)
    assert pathwise_compare(A, C) <= pathwise_compare(A, B) + pathwise_compare(B, C) + 1e-9


def test_pathwise_compare_rejects_mismatch():
    a = _traj(np.zeros(32))
    with pytest.raises(ValueError):
        pathwise_compare(a, Trajectory(a.grid, np.array([0.0, 2.0]), a.states))
    g = grid(1, 2.0, 8)
    with pytest.raises(ValueError):
        pathwise_compare(a, Trajectory(g, a.times, np.zeros((2, 8))))


# --- Picard rate check -----------------------------------------------------------------

def test_rate_check_examples():
    assert picard_rate_check([1, 0.1, 0.005, 1e-4, 1e-6]).passed
    assert not picard_rate_check([1, 1, 1, 1, 1]).passed


def test_rate_check_factorial_sequence():
    H = [0.5**n / math.factorial(n) for n in range(10)]
    rc = picard_rate_check(H)
    assert rc.passed and rc.monotone
    assert rc.xi_T == pytest.approx(0.5)


def test_rate_check_rejects_late_stall():
    # fast early contraction that then stalls breaks the fitted envelope
    H = [1, 0.1, 0.005, 1.6e-4, 4e-6, 3.9e-6, 3.8e-6, 3.7e-6]
    rc = picard_rate_check(H)
    assert rc.monotone and not rc.passed


def test_rate_check_rejects_growth():
    rc = picard_rate_check([1, 0.5, 0.2, 0.3, 0.1, 0.05])
    assert not rc.monotone and not rc.passed


def test_rate_check_exact_convergence():
    rc = picard_rate_check([1.0, 0.0, 0.0, 0.0, 0.0])
    assert rc.passed and rc.xi_T == 0.0


def test_rate_check_errors():
    with pytest.raises(ValueError):
        picard_rate_check([1, 0.1, 0.01])
    with pytest.raises(ValueError):
        picard_rate_check([1, -0.1, 0.01, 0.001, 1e-5])
    with pytest.raises(ValueError):
        picard_rate_check([1, np.nan, 0.01, 0.001, 1e-5])


def test_no_warnings_on_mesh_lags(linear_ensemble):
    g, phi, ens = linear_ensemble
    with warnings.catch_warnings():
        warnings.simplefilter("error", OffGridLag)
        empirical_covariance(ens, 1.0, [0.0, g.dx, 2 * g.dx], phi)
