import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactwave.errors import BlowUp, BudgetExceeded, InvalidInitialData, StepRejected, TimeMismatch
from contactwave.fd import sq_norm
from contactwave.flow import (
    CoupledSolver,
    FlowField,
    InitialData,
    flow_rhs,
    heun_flow,
    make_initial,
    perturbation_arrays,
    perturbation_of,
    perturbation_residual,
    reconstruct,
    residual_norm,
    stable_dt,
    step_flow,
    total_energy,
)
from contactwave.params import Grid, PhysParams
from contactwave.profile import initial_profile


def uniform_state(params, grid, t=0.0):
    n = grid.n_nodes
    return FlowField(t, np.full(n, params.v_plus), np.zeros(n), np.full(n, params.theta_plus))


# ---- initial data --------------------------------------------------------


def test_initial_data_validation():
    with pytest.raises(InvalidInitialData):
        InitialData(shape="square")
    with pytest.raises(InvalidInitialData):
        InitialData(shape="gaussian", width=0.0)


def test_gaussian_norm_and_pinned_ends(small_grid):
    a, w = 0.05, 1.5
    phi, psi, zeta = perturbation_arrays(InitialData("gaussian", amp_phi=a, width=w), small_grid)
    assert np.all(psi == 0.0) and np.all(zeta == 0.0)
    assert phi[0] == 0.0 and phi[-1] == 0.0
    # integral of a^2 exp(-2 s^2 / w^2) is sqrt(pi/2) a^2 w
    assert sq_norm(phi, small_grid.dx) == pytest.approx(math.sqrt(math.pi / 2) * a * a * w, rel=1e-10)


def test_cosine_is_compact_and_peaks_at_amplitude(small_grid):
    phi, _, _ = perturbation_arrays(InitialData("cosine", amp_phi=0.1, center=1.0, width=2.0), small_grid)
    assert np.all(phi[np.abs(small_grid.x - 1.0) >= 2.0] == 0.0)
    assert phi.max() == pytest.approx(0.1, rel=1e-12)


def test_random_shape_reproducible_and_scaled(small_grid):
    spec = InitialData("random", amp_psi=0.02, width=2.0, seed=7)
    a = perturbation_arrays(spec, small_grid)[1]
    b = perturbation_arrays(spec, small_grid)[1]
    c = perturbation_arrays(replace(spec, seed=8), small_grid)[1]
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.max(np.abs(a)) == pytest.approx(0.02, rel=1e-12)


def test_scaled_and_extent():
    spec = InitialData("gaussian", amp_phi=0.1, amp_zeta=-0.3, width=2.0)
    assert spec.scaled(0.5).max_amplitude == pytest.approx(0.15)
    assert spec.extent() == 12.0
    assert replace(spec, shape="cosine").extent() == 2.0


def test_make_initial_rejects_nonpositive_states(params, small_grid):
    prof = initial_profile(params, small_grid)
    with pytest.raises(InvalidInitialData):
        make_initial(prof, InitialData("gaussian", amp_zeta=-2.0), small_grid)


# ---- spatial operator ----------------------------------------------------


def test_uniform_state_is_fixed_point(params, small_grid):
    s = uniform_state(params, small_grid)
    (rv, ru, re), flux = flow_rhs(s.v, s.u, total_energy(s.u, s.theta, params), params, small_grid.dx)
    assert not rv.any() and not ru.any() and not re.any()
    new = step_flow(s, 1e-3, params, small_grid)
    assert np.array_equal(new.v, s.v) and np.array_equal(new.u, s.u) and np.array_equal(new.theta, s.theta)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rhs_is_conservative(seed):
    """The node sums of the rates equal minus the net boundary flux."""
    rng = np.random.default_rng(seed)
    p = PhysParams()
    n, dx = 61, 0.1
    v = 1.0 + 0.3 * rng.random(n)
    u = 0.2 * rng.standard_normal(n)
    th = 0.7 + 0.3 * rng.random(n)
    (rv, ru, re), flux = flow_rhs(v, u, total_energy(u, th, p), p, dx)
    assert rv[0] == rv[-1] == ru[0] == ru[-1] == re[0] == re[-1] == 0.0
    for rate, f in ((rv, flux.mass), (ru, flux.momentum), (re, flux.energy)):
        assert np.sum(rate) * dx == pytest.approx(-f, abs=1e-12 * (1 + np.sum(np.abs(rate)) * dx))


def test_momentum_and_volume_rates_ignore_velocity_shift(params):
    rng = np.random.default_rng(3)
    n, dx = 81, 0.1
    v = 1.0 + 0.2 * rng.random(n)
    u = 0.1 * rng.standard_normal(n)
    th = 0.8 + 0.2 * rng.random(n)
    (rv, ru, _), _ = flow_rhs(v, u, total_energy(u, th, params), params, dx)
    (rv2, ru2, _), _ = flow_rhs(v, u + 0.37, total_energy(u + 0.37, th, params), params, dx)
    assert np.allclose(rv, rv2, atol=1e-12) and np.allclose(ru, ru2, atol=1e-12)


def test_stable_dt_formula(params):
    v = np.array([1.0, 2.0, 1.5])
    u = np.zeros(3)
    th = np.array([1.0, 0.5, 0.8])
    dx = 0.1
    diffusive = dx * dx * 1.0 * min(1 / params.mu, params.cv / params.kappa)
    c_max = max(math.sqrt(params.gamma * params.R * t) / w for t, w in zip(th, v))
    assert stable_dt(v, u, th, params, dx) == pytest.approx(0.3 * min(diffusive, dx / c_max), rel=1e-15)
    assert stable_dt(v, u, th, params, dx, safety=0.6) == pytest.approx(2 * stable_dt(v, u, th, params, dx))


def test_oversized_step_rejected(params, small_grid):
    s = uniform_state(params, small_grid)
    u = s.u.copy()
    u[100] = 1.0
    with pytest.raises(StepRejected):
        heun_flow(s.v, u, s.theta, 10.0, params, small_grid.dx)


# ---- perturbations -------------------------------------------------------


def test_perturbation_round_trip(params, small_grid):
    prof = initial_profile(params, small_grid)
    state = make_initial(prof, InitialData("gaussian", 0.05, -0.02, 0.03), small_grid)
    back = reconstruct(perturbation_of(state, prof), prof)
    # subtract then add back: exact for v and theta, within an ulp for u
    assert np.array_equal(back.v, state.v)
    assert np.array_equal(back.theta, state.theta)
    assert np.allclose(back.u, state.u, rtol=0, atol=np.spacing(np.abs(state.u).max()))


def test_perturbation_time_mismatch(params, small_grid):
    prof = initial_profile(params, small_grid)
    with pytest.raises(TimeMismatch):
        perturbation_of(uniform_state(params, small_grid, t=1.0), prof)
    with pytest.raises(TimeMismatch):
        perturbation_residual(uniform_state(params, small_grid), prof, uniform_state(params, small_grid), prof,
                              params, small_grid)


def _pair(params, grid, initial, t):
    solver = CoupledSolver(params, grid, initial)
    solver.advance_to(t - grid.dx / 5)
    first = (solver.state(), solver.profile())
    solver.advance_to(t)
    return first, (solver.state(), solver.profile())


@pytest.fixture(scope="module")
def residual_levels():
    p = PhysParams()
    init = InitialData("gaussian", 0.02, 0.02, 0.02, width=1.0)
    out = []
    for k in range(3):
        g = Grid(10.0, 101).refined(k)
        out.append((g, _pair(p, g, init, 0.5)))
    return p, out


def test_residual_converges_at_second_order(residual_levels):
    p, levels = residual_levels
    norms = [residual_norm(perturbation_residual(a[0], a[1], b[0], b[1], p, g), g, 5.0)
             for g, (a, b) in levels]
    assert math.log2(norms[0] / norms[1]) >= 1.8
    assert math.log2(norms[1] / norms[2]) >= 1.8


def test_residual_without_momentum_source_stalls(residual_levels):
    p, levels = residual_levels
    norms = []
    for g, (a, b) in levels:
        a1 = replace(a[1], F=np.zeros_like(a[1].F))
        b1 = replace(b[1], F=np.zeros_like(b[1].F))
        norms.append(residual_norm(perturbation_residual(a[0], a1, b[0], b1, p, g), g, 5.0))
    assert norms[2] > 0.5 * norms[0]


def test_residual_zero_for_uniform_pair(params, small_grid):
    s0 = uniform_state(params, small_grid)
    s1 = uniform_state(params, small_grid, t=0.1)
    p0 = initial_profile(params.replace(theta_minus=params.theta_plus), small_grid)
    p1 = replace(p0, t=0.1)
    r = perturbation_residual(s0, p0, s1, p1, params.replace(theta_minus=params.theta_plus), small_grid)
    assert residual_norm(r, small_grid) == 0.0


# ---- coupled driver ------------------------------------------------------


def test_solver_reaches_exact_end_time_and_audits(params):
    solver = CoupledSolver(params, Grid(10.0, 101), InitialData("gaussian", 0.05, 0.0, 0.0))
    seen = []
    solver.advance_to(0.37, callback=lambda s: seen.append(s.t), every=5)
    assert solver.t == 0.37
    assert all(np.diff(seen) > 0)
    a = solver.audit.to_dict()
    assert a["mass_max_rel"] <= 1e-14
    assert a["energy_rel_per_time"] <= 1e-12
    assert a["elapsed"] == 0.37
    assert solver.profile().t == solver.t


def test_solver_budget_and_blowup(params):
    solver = CoupledSolver(params, Grid(10.0, 101), max_steps=3)
    with pytest.raises(BudgetExceeded):
        solver.advance_to(1.0)
    s = CoupledSolver(params, Grid(10.0, 101), InitialData("gaussian", amp_psi=0.5), dt_min=0.5)
    with pytest.raises(BlowUp):
        s.step(10.0)
