import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import expit

from snfield import kernels as kz
from snfield import noise as nz
from snfield.dynamics import (Affine, BlowUpError, BoundedSmooth, ConstantDiffusion, ConstantGain, ModelSpec,
                              Scheme, Sigmoid, SmoothHeaviside, SolverConfig, coarsen, draw_increments, drift_F,
                              noise_weight, picard_solve, solve_ensemble, solve_frozen, solve_hilbert_path,
                              solve_path, step)
from snfield.grid import Field, GridMismatch, GridSpec, make_grid
from snfield.verify import pathwise_compare, picard_rate_check

SQRT_PI = math.sqrt(math.pi)


def grid(dim=1, L=10.0, n=256):
    return make_grid(GridSpec(dim, L, n))


def smooth_model(g):
    return ModelSpec(kz.gaussian(g), Sigmoid(1.0), Affine(0.5, 0.5))


# --- drift and single steps -------------------------------------------------------

def test_constant_gain_with_unit_mass_kernel():
    g = grid()
    m = ModelSpec(kz.normalized_gaussian(g), ConstantGain(1.0))
    y = np.random.default_rng(0).normal(size=g.size)
    np.testing.assert_allclose(drift_F(m, y), 1.0, atol=1e-12)


def test_zero_kernel_has_no_drift():
    g = grid(1, 2.0, 16)
    m = ModelSpec(kz.zero(g), Sigmoid())
    assert np.all(drift_F(m, g.constant(3.0)).values == 0.0)


def test_sigmoid_drift_at_rest():
    g = grid()
    F = drift_F(ModelSpec(kz.gaussian(g), Sigmoid(1.0)), g.constant(0.0)).values
    assert np.max(np.abs(F - 0.5 * SQRT_PI)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=16, max_size=16), st.floats(1e-4, 2.0))
def test_pure_decay(y, dt):
    g = grid(1, 2.0, 16)
    m = ModelSpec(kz.zero(g), ConstantGain(0.0), ConstantDiffusion(0.0))
    y = np.asarray(y)
    out = step(m, y, dt, np.ones(16))
    assert np.array_equal(out, math.exp(-dt) * y + 0.0)


def test_fixed_point_preserved():
    g = grid()
    y_star = brentq(lambda y: SQRT_PI * expit(y) - y, 0.0, 5.0, xtol=1e-15)
    m = ModelSpec(kz.gaussian(g), Sigmoid(1.0), ConstantDiffusion(0.0))
    y = g.constant(y_star)
    for dt in (0.01, 0.1, 1.0):
        out = step(m, y, dt, g.constant(0.0))
        assert np.max(np.abs(out.values - y_star)) < 1e-10


def test_noise_weight_small_dt_limit():
    assert noise_weight(1e-8) == pytest.approx(1.0, abs=1e-7)
    assert noise_weight(1.0) == pytest.approx(math.sqrt((1 - math.exp(-2)) / 2), rel=1e-15)


def test_step_shape_mismatch():
    g = grid(1, 2.0, 16)
    with pytest.raises(GridMismatch):
        step(ModelSpec(kz.zero(g)), np.zeros(16), 0.1, np.zeros(8))


def test_blow_up_guard():
    g = grid(1, 2.0, 16)
    m = ModelSpec(kz.zero(g), ConstantGain(0.0), Affine(0.0, 1.0))
    with pytest.raises(BlowUpError):
        step(m, np.full(16, 1e11), 1.0, np.full(16, 100.0), Scheme.EULER_MARUYAMA)


# --- model and config validation ----------------------------------------------------

@dataclass(frozen=True)
class LyingDiffusion:
    def __call__(self, a):
        return np.asarray(a, dtype=float) ** 2

    lipschitz = 1.0


def test_model_validation():
    g = grid(1, 2.0, 16)
    with pytest.raises(ValueError):
        ModelSpec(kz.zero(g), Sigmoid(), LyingDiffusion())
    with pytest.raises(GridMismatch):
        ModelSpec(kz.zero(g), initial=np.zeros(3))
    m = ModelSpec(kz.gaussian(grid()), SmoothHeaviside(0.2), BoundedSmooth(0.5, 1.0))
    assert m.C_G == pytest.approx(2.5) and m.C_sigma == pytest.approx(1.5)
    assert m.C_w == pytest.approx(SQRT_PI, rel=1e-10)


@pytest.mark.parametrize("args", [(0.0, 1.0), (2.0, 1.0), (0.3, 1.0)])
def test_solver_config_validation(args):
    with pytest.raises(ValueError):
        SolverConfig(*args)


def test_record_steps_include_final():
    c = SolverConfig(0.1, 1.0, record_every=3)
    assert c.n_steps == 10
    assert c.record_steps.tolist() == [0, 3, 6, 9, 10]


def test_coarsen_sums_groups():
    inc = np.arange(12.0).reshape(6, 1, 2)
    out = coarsen(inc, 3)
    assert out.shape == (2, 1, 2)
    assert out[0, 0].tolist() == [0 + 2 + 4, 1 + 3 + 5]
    with pytest.raises(ValueError):
        coarsen(inc, 4)


# --- path solvers ------------------------------------------------------------------

def test_deterministic_relaxation():
    g = grid()
    m = ModelSpec(kz.normalized_gaussian(g), ConstantGain(1.0), ConstantDiffusion(0.0))
    for dt in (0.1, 0.25):
        tr = solve_path(m, SolverConfig(dt, 2.0), nz.smoothed_white(nz.delta_profile(g)))
        exact = 1.0 - np.exp(-tr.times)
        assert np.max(np.abs(tr.states - exact[:, None])) < 1e-8


def test_path_determinism_and_block_independence():
    g = grid(1, 5.0, 64)
    m = smooth_model(g)
    noise = nz.smoothed_white(nz.indicator(g), seed=3)
    cfg = SolverConfig(0.01, 0.3, n_paths=600, record_every=10)
    a = solve_path(m, cfg, noise, path_index=417)
    b = solve_path(m, cfg, noise, path_index=417)
    assert pathwise_compare(a, b) == 0.0
    ens1 = solve_ensemble(m, cfg, noise, threads=1)
    ens4 = solve_ensemble(m, cfg, noise, threads=4)
    assert ens1.states.tobytes() == ens4.states.tobytes()
    assert ens1.path(417).states.tobytes() == a.states.tobytes()


def test_hilbert_with_zero_spectrum_is_deterministic_run():
    g = grid(1, 5.0, 64)
    phi = nz.indicator(g)
    zero_sp = nz.Spectrum([0.0] * 4, nz.fourier_spectrum(nz.analytic_covariance(phi), 4).basis)
    cfg = SolverConfig(0.05, 1.0)
    hil = solve_hilbert_path(smooth_model(g), cfg, nz.qwiener(nz.delta_profile(g), zero_sp, seed=1))
    det = solve_path(ModelSpec(kz.gaussian(g), Sigmoid(1.0), ConstantDiffusion(0.0)), cfg,
                     nz.smoothed_white(phi, seed=1))
    assert pathwise_compare(hil, det) == 0.0


def test_hilbert_single_flat_mode_is_scalar_ou():
    g = grid(1, 2.0, 16)
    e = np.full(g.size, 1.0 / math.sqrt(g.volume))
    noise = nz.qwiener(nz.delta_profile(g), nz.Spectrum([2.0], [e]), seed=9)
    m = ModelSpec(kz.zero(g), ConstantGain(0.0), ConstantDiffusion(1.0))
    ens = solve_ensemble(m, SolverConfig(0.1, 5.0, n_paths=4000, record_every=50), noise)
    y = ens.at(5.0)
    assert np.all(np.ptp(y, axis=1) < 1e-12)
    target = 2.0 * e[0] ** 2 * (-math.expm1(-10.0)) / 2
    s = y[:, 0] ** 2
    assert abs(s.mean() - target) / (s.std(ddof=1) / math.sqrt(len(s))) < 4


def test_solve_path_requires_matching_noise_mode():
    g = grid(1, 2.0, 16)
    with pytest.raises(ValueError):
        solve_hilbert_path(ModelSpec(kz.zero(g)), SolverConfig(0.1, 1.0), nz.smoothed_white(nz.indicator(g)))
    with pytest.raises(ValueError):
        solve_path(ModelSpec(kz.zero(g)), SolverConfig(0.1, 1.0), nz.matched_qwiener(nz.indicator(g)))


def test_noise_and_model_grid_must_match():
    with pytest.raises(GridMismatch):
        solve_ensemble(ModelSpec(kz.zero(grid(1, 2.0, 16))), SolverConfig(0.1, 1.0),
                       nz.smoothed_white(nz.indicator(grid(1, 2.0, 32))))


def test_unit_mass_run_on_2d_grid():
    g = grid(2, 4.0, 16)
    m = ModelSpec(kz.normalized_gaussian(g), ConstantGain(1.0), ConstantDiffusion(0.0))
    tr = solve_path(m, SolverConfig(0.1, 1.0), nz.smoothed_white(nz.delta_profile(g)))
    assert np.max(np.abs(tr.states[-1] - (1 - math.exp(-1.0)))) < 1e-8


# --- frozen noise: uniqueness and scheme consistency --------------------------------

@pytest.fixture(scope="module")
def frozen():
    g = grid()
    phi = nz.indicator(g)
    return g, phi, draw_increments(nz.smoothed_white(phi, seed=6), 0.005, 200, paths=np.arange(20))


def test_pathwise_uniqueness(frozen):
    g, _, inc = frozen
    m = smooth_model(g)
    cfg = SolverConfig(0.005, 1.0, n_paths=20)
    assert pathwise_compare(solve_frozen(m, cfg, inc), solve_frozen(m, cfg, inc)) <= 1e-12


def test_frozen_matches_live_noise(frozen):
    g, phi, inc = frozen
    m = smooth_model(g)
    cfg = SolverConfig(0.005, 1.0, n_paths=20)
    live = solve_ensemble(m, cfg, nz.smoothed_white(phi, seed=6))
    assert pathwise_compare(live, solve_frozen(m, cfg, inc)) == 0.0


def test_scheme_consistency_is_first_order(frozen):
    g, _, fine = frozen
    m = smooth_model(g)
    diffs = []
    for factor, dt in [(4, 0.02), (2, 0.01), (1, 0.005)]:
        inc = coarsen(fine, factor)
        a = solve_frozen(m, SolverConfig(dt, 1.0, Scheme.EXPONENTIAL_EULER, n_paths=20), inc)
        b = solve_frozen(m, SolverConfig(dt, 1.0, Scheme.EULER_MARUYAMA, n_paths=20), inc)
        diffs.append(float(np.max(np.abs(a.states[:, -1] - b.states[:, -1]))))
    assert diffs[1] <= 0.5
    assert 1.4 <= diffs[0] / diffs[1] <= 2.6
    assert 1.4 <= diffs[1] / diffs[2] <= 2.6


def test_second_moment_bounded_by_initial_data():
    # sup E|Y|^2 <= C (1 + E|Y0|^2): fit C at dt, it must still hold at dt / 2
    g = grid(1, 10.0, 128)
    noise = nz.smoothed_white(nz.indicator(g), seed=14)
    fitted = {}
    for dt in (0.01, 0.005):
        ratios = []
        for y0 in (0.0, 1.0, 2.0, 4.0):
            m = ModelSpec(kz.mexican_hat(g), Sigmoid(2.0), Affine(0.5, 0.3), np.full(g.size, y0))
            ens = solve_ensemble(m, SolverConfig(dt, 2.0, n_paths=200, record_every=10), noise)
            assert np.all(np.isfinite(ens.states))
            ratios.append(float(np.max(np.mean(ens.states**2, axis=0))) / (1.0 + y0**2))
        fitted[dt] = max(ratios)
    assert fitted[0.005] <= 1.1 * fitted[0.01]
    assert fitted[0.01] < 10.0


# --- Picard iteration ------------------------------------------------------------------

def test_picard_at_fixed_point_is_stationary():
    g = grid()
    y_star = brentq(lambda y: SQRT_PI * expit(y) - y, 0.0, 5.0, xtol=1e-15)
    m = ModelSpec(kz.gaussian(g), Sigmoid(1.0), ConstantDiffusion(0.0), np.full(g.size, y_star))
    inc = np.zeros((50, 3, g.size))
    d = picard_solve(m, inc, 0.02, 4)
    assert max(d.H) < 1e-24


def test_picard_linear_case_converges_in_one_sweep(frozen):
    g, phi, inc = frozen
    m = ModelSpec(kz.zero(g), ConstantGain(0.0), ConstantDiffusion(1.0))
    d = picard_solve(m, inc, 0.005, 3, phi=phi)
    assert d.H[0] > 0
    assert all(h == 0.0 for h in d.H[1:])


@pytest.fixture(scope="module")
def picard_run():
    g = grid()
    phi = nz.indicator(g)
    inc = draw_increments(nz.smoothed_white(phi, seed=3), 0.01, 100, paths=np.arange(100))
    m = smooth_model(g)
    return m, inc, picard_solve(m, inc, 0.01, 8, phi=phi)


def test_picard_contracts_factorially(picard_run):
    _, _, d = picard_run
    H = np.asarray(d.H)
    assert np.all(np.diff(H[2:]) < 0)
    assert H[8] / H[2] < 1e-6
    assert picard_rate_check(d).passed
    K, C_w, phi2 = d.bound_constants
    xi = K * (d.T * C_w**2 + phi2) * d.T
    for n in range(1, len(H)):
        assert H[n] / H[n - 1] <= xi / n


def test_picard_limit_matches_solver(picard_run):
    m, inc, d = picard_run
    ens = solve_frozen(m, SolverConfig(0.01, 1.0, n_paths=100), inc)
    assert np.max(np.abs(ens.states[:, -1] - d.last_iterate[-1])) <= 5 * 0.01


def test_picard_rejects_bad_noise_shape():
    g = grid(1, 2.0, 16)
    with pytest.raises(ValueError):
        picard_solve(ModelSpec(kz.zero(g)), np.zeros((5, 16)), 0.1, 3)
    with pytest.raises(ValueError):
        picard_solve(ModelSpec(kz.zero(g)), np.zeros((5, 1, 16)), 0.1, 1)


def test_fingerprints_track_content():
    g = grid(1, 2.0, 16)
    a = ModelSpec(kz.gaussian(g), Sigmoid(1.0))
    b = ModelSpec(kz.gaussian(g), Sigmoid(2.0))
    assert a.fingerprint() == ModelSpec(kz.gaussian(g), Sigmoid(1.0)).fingerprint()
    assert a.fingerprint() != b.fingerprint()
    m1 = ModelSpec(kz.from_matrix(g, np.eye(16)))
    m2 = ModelSpec(kz.from_matrix(g, 2 * np.eye(16)))
    assert m1.fingerprint() != m2.fingerprint()
    assert SolverConfig(0.1, 1.0).fingerprint() != SolverConfig(0.1, 2.0).fingerprint()


def test_trajectory_field_access():
    g = grid(1, 2.0, 16)
    tr = solve_path(ModelSpec(kz.zero(g)), SolverConfig(0.1, 0.5), nz.smoothed_white(nz.indicator(g)))
    assert isinstance(tr.field_at(-1), Field)
    assert len(tr.times) == 6
