import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactwave.diagnostics import (
    DecaySeries,
    EnergyReport,
    EnergyTracker,
    MIN_FIT_SAMPLES,
    apriori_monitor,
    fit_power_law,
    geometric_times,
    monotone_after_peak,
    norms,
    phi_entropy,
    profile_decay_suite,
    psi_entropy,
    quadratic_bounds,
    relative_entropy,
    running_integral,
)
from contactwave.errors import DomainError, InsufficientData, NonpositiveValue
from contactwave.flow import FlowField, InitialData, Perturbation, make_initial
from contactwave.params import Grid, PhysParams
from contactwave.profile import initial_profile, make_profile

positive = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


# ---- entropy functions ---------------------------------------------------


def test_phi_entropy_values():
    assert phi_entropy(1.0) == 0.0
    assert phi_entropy(math.e) == pytest.approx(math.e - 2.0, rel=1e-15)
    # near 1 the function is (z-1)^2/2 to leading order; the log1p form keeps it
    assert phi_entropy(1.0 + 1e-9) == pytest.approx(0.5e-18, rel=1e-6)


@given(positive)
def test_phi_entropy_nonnegative_and_dual(z):
    assert phi_entropy(z) >= 0.0
    assert psi_entropy(z) == pytest.approx(phi_entropy(1.0 / z), rel=1e-12, abs=1e-300)


@given(st.floats(0.05, 20.0))
def test_phi_entropy_quadratic_minorant(z):
    # Phi'' = 1/z^2 >= 1/max(1, z)^2 on the segment from 1 to z
    assert phi_entropy(z) >= (z - 1.0) ** 2 / (2.0 * max(1.0, z) ** 2) * (1 - 1e-12)


def test_entropy_domain_errors():
    for f in (phi_entropy, psi_entropy):
        with pytest.raises(DomainError):
            f(0.0)
        with pytest.raises(DomainError):
            f(np.array([1.0, -2.0]))
        with pytest.raises(DomainError):
            f(float("nan"))


def test_entropy_vectorized():
    z = np.array([0.5, 1.0, 2.0])
    out = phi_entropy(z)
    assert out.shape == (3,) and out[1] == 0.0


# ---- norms ---------------------------------------------------------------


def test_norms_gaussian():
    g = Grid(20.0, 4001)
    a, w = 0.3, 1.2
    f = a * np.exp(-(g.x / w) ** 2)
    z = np.zeros_like(f)
    l2, h1, linf = norms(Perturbation(0.0, f, z, z), g)
    assert l2 == pytest.approx(math.sqrt(math.pi / 2) * a * a * w, rel=1e-10)
    # ||f'||^2 = sqrt(pi/2) a^2 / w, up to the O(dx^2) error of centered differences
    assert h1 - l2 == pytest.approx(math.sqrt(math.pi / 2) * a * a / w, rel=2e-4)
    assert linf == a


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10).filter(lambda c: abs(c) > 1e-3), st.integers(0, 1000))
def test_norms_homogeneous(c, seed):
    g = Grid(5.0, 101)
    rng = np.random.default_rng(seed)
    p = Perturbation(0.0, *(rng.standard_normal(g.n_nodes) for _ in range(3)))
    q = Perturbation(0.0, c * p.phi, c * p.psi, c * p.zeta)
    a, b = norms(p, g), norms(q, g)
    assert b[0] == pytest.approx(c * c * a[0], rel=1e-12)
    assert b[1] == pytest.approx(c * c * a[1], rel=1e-12)
    assert b[2] == pytest.approx(abs(c) * a[2], rel=1e-12)


# ---- relative entropy ----------------------------------------------------


def test_relative_entropy_zero_on_profile(params, small_grid):
    prof = initial_profile(params, small_grid)
    state = FlowField(0.0, prof.V.copy(), prof.U.copy(), prof.Theta.copy())
    assert relative_entropy(state, prof, params, small_grid) == 0.0


def test_relative_entropy_even_in_velocity(params, small_grid):
    prof = initial_profile(params, small_grid)
    bump = 0.1 * np.exp(-small_grid.x**2)
    plus = FlowField(0.0, prof.V, prof.U + bump, prof.Theta)
    minus = FlowField(0.0, prof.V, prof.U - bump, prof.Theta)
    e = relative_entropy(plus, prof, params, small_grid)
    assert e == relative_entropy(minus, prof, params, small_grid)
    # velocity-only perturbation carries exactly half its squared L2 norm
    assert e == pytest.approx(0.5 * np.sum(bump**2) * small_grid.dx, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.4), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_quadratic_bounds_sandwich(a_phi, a_psi, a_zeta):
    p = PhysParams()
    g = Grid(10.0, 201)
    prof = initial_profile(p, g)
    state = make_initial(prof, InitialData("gaussian", a_phi, a_psi, a_zeta), g)
    pert = Perturbation(0.0, state.v - prof.V, state.u - prof.U, state.theta - prof.Theta)
    l2 = norms(pert, g)[0]
    c1, c2 = quadratic_bounds(state, prof, p)
    e = relative_entropy(state, prof, p, g)
    assert 0 < c1 <= c2
    assert c1 * l2 * (1 - 1e-3) <= e <= c2 * l2 * (1 + 1e-3)


# ---- energy tracker ------------------------------------------------------


def test_tracker_zero_perturbation_accumulates_nothing(params, small_grid):
    tr = EnergyTracker(params, small_grid)
    th = np.full(small_grid.n_nodes, 0.8)
    reports = []
    for t in (0.0, 0.5, 1.0):
        prof = make_profile(th, t, params, small_grid)
        state = FlowField(t, prof.V, prof.U, prof.Theta)
        reports.append(tr.report(state, prof))
    last = reports[-1]
    assert last.dissipation_accum == last.source_budget == last.weighted_gradient == 0.0
    assert last.l2 == last.h1 == last.linf == last.rel_entropy == 0.0
    mon = apriori_monitor(reports)
    assert all(mon.checks.values())
    assert mon["ratio"] == 0.0


def test_tracker_trapezoid_of_constant_integrand(params, small_grid):
    """A frozen perturbation gives integrals growing linearly in time."""
    tr = EnergyTracker(params, small_grid)
    prof0 = initial_profile(params, small_grid)
    state = make_initial(prof0, InitialData("gaussian", 0.05, 0.05, 0.05), small_grid)
    f0 = tr.integrands(state, prof0)
    for t in np.linspace(0.0, 2.0, 9):
        s = FlowField(t, state.v, state.u, state.theta)
        p = make_profile(prof0.Theta, t, params, small_grid)
        rep = tr.report(s, p)
    assert rep.dissipation_first == pytest.approx(2.0 * f0[0], rel=1e-12)
    assert rep.dissipation_second == pytest.approx(2.0 * f0[1], rel=1e-12)
    assert rep.dissipation_accum == pytest.approx(rep.dissipation_first + rep.dissipation_second)
    assert set(rep.to_dict()) == set(EnergyReport.__dataclass_fields__)


# ---- series and fits -----------------------------------------------------


def test_decay_series_validation():
    with pytest.raises(ValueError):
        DecaySeries("a", [0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        DecaySeries("a", [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        DecaySeries("a", [0.0, 1.0], [1.0, -1.0])
    with pytest.raises(ValueError):
        DecaySeries("a", [0.0, 1.0], [1.0, float("nan")])


def test_fit_exact_power_law():
    t = geometric_times(1.0, 1e4)
    s = DecaySeries("q", t, 3.0 * (1 + t) ** -1.5)
    fit = fit_power_law(s, (10.0, 1e4))
    assert fit.exponent == pytest.approx(-1.5, abs=1e-12)
    assert fit.log_constant == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.rms_residual < 1e-12
    assert fit.n_samples >= MIN_FIT_SAMPLES


def test_fit_with_noise_and_constant():
    t = geometric_times(1.0, 1e4)
    rng = np.random.default_rng(0)
    s = DecaySeries("q", t, (1 + t) ** -0.5 * (1 + 0.01 * rng.standard_normal(t.size)))
    assert fit_power_law(s, (10.0, 1e4)).exponent == pytest.approx(-0.5, abs=0.01)
    assert fit_power_law(DecaySeries("c", t, np.full(t.size, 2.0)), (10.0, 1e4)).exponent == pytest.approx(0, abs=1e-12)


@given(st.floats(1e-8, 1e8))
def test_fit_scale_invariant(c):
    t = geometric_times(1.0, 1e3)
    v = (1 + t) ** -1.0 * (1 + 0.1 * np.sin(t))
    a = fit_power_law(DecaySeries("q", t, v), (10.0, 1e3)).exponent
    b = fit_power_law(DecaySeries("q", t, c * v), (10.0, 1e3)).exponent
    assert a == pytest.approx(b, abs=1e-9)


def test_fit_errors():
    t = geometric_times(1.0, 1e4)
    with pytest.raises(InsufficientData):
        fit_power_law(DecaySeries("q", t, np.ones(t.size)), (10.0, 20.0))
    v = np.ones(t.size)
    v[-5] = 0.0
    with pytest.raises(NonpositiveValue):
        fit_power_law(DecaySeries("q", t, v), (10.0, 1e4))


def test_default_fit_window():
    t = geometric_times(1.0, 3000.0)
    fit = fit_power_law(DecaySeries("q", t, (1 + t) ** -2.0))
    assert fit.window == (10.0, 1000.0)


def test_geometric_times_and_running_integral():
    t = geometric_times(0.5, 40.0)
    assert t[0] == 0.5 and t[-1] == 40.0
    assert np.all(np.diff(t) > 0)
    x = np.linspace(0, 2, 41)
    assert running_integral(x, 3 * x)[-1] == pytest.approx(6.0, rel=1e-14)
    assert running_integral(x, x)[0] == 0.0


def test_profile_suite_on_flat_profile(params, small_grid):
    flat = params.replace(theta_minus=params.theta_plus)
    snaps = [(t, np.full(small_grid.n_nodes, flat.theta_plus)) for t in (0.0, 1.0, 2.0)]
    suite = profile_decay_suite(snaps, flat, small_grid)
    for name, s in suite.items():
        assert np.all(s.values == 0.0), name
    assert list(suite["F"].times) == [0.0, 1.0, 2.0]


def test_monotone_after_peak():
    t = np.linspace(0, 10, 101)
    rise_fall = np.minimum(t, 10 - t)
    ok, growth = monotone_after_peak(t, rise_fall, 2.0)
    assert ok and growth < 0
    bounce = np.where(t < 5, 10 - t, 5 + (t - 5))
    ok, growth = monotone_after_peak(t, np.maximum(bounce, 0), 2.0)
    assert not ok and growth > 0.01
    # growth within the tolerance is allowed
    wobble = 1.0 / (1 + t) * (1 + 0.004 * np.sin(5 * t))
    assert monotone_after_peak(t, wobble, 2.0)[0]
