"""Norms, entropy functionals, running integrals and power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientData, NonpositiveValue
from .fd import d1, d2, sq_norm, trapezoid
from .params import Grid, PhysParams
from .profile import ProfileField, make_profile
from .records import BoundReport


def _positive(z, name="z"):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0.0)):
        raise DomainError(f"{name} must be strictly positive")
    return z


def phi_entropy(z):
    """z - ln z - 1, written as (z-1) - log1p(z-1) to keep accuracy near z = 1."""
    z = _positive(z)
    w = z - 1.0
    out = w - np.log1p(w)
    return float(out) if out.ndim == 0 else out


def psi_entropy(z):
    """1/z + ln z - 1, i.e. phi_entropy(1/z)."""
    z = _positive(z)
    w = 1.0 / z - 1.0
    out = w - np.log1p(w)
    return float(out) if out.ndim == 0 else out


def norms(pert, grid: Grid):
    """(squared L2, squared H1, L-infinity) of the triple (phi, psi, zeta).

    The H1 value adds the squared L2 norms of the centered first derivatives.
    """
    dx = grid.dx
    comps = (pert.phi, pert.psi, pert.zeta)
    l2 = sum(sq_norm(f, dx) for f in comps)
    h1 = l2 + sum(sq_norm(d1(f, dx), dx) for f in comps)
    linf = max(float(np.max(np.abs(f))) for f in comps)
    return l2, h1, linf


def relative_entropy_density(state, profile: ProfileField, params: PhysParams):
    v_ratio = _positive(state.v, "v") / _positive(profile.V, "V")
    t_ratio = _positive(state.theta, "theta") / _positive(profile.Theta, "Theta")
    psi = state.u - profile.U
    return (
        params.R * profile.Theta * phi_entropy(v_ratio)
        + 0.5 * psi * psi
        + params.cv * profile.Theta * phi_entropy(t_ratio)
    )


def relative_entropy(state, profile: ProfileField, params: PhysParams, grid: Grid) -> float:
    """Integral of R Theta Phi(v/V) + psi^2/2 + C_v Theta Phi(theta/Theta)."""
    return trapezoid(relative_entropy_density(state, profile, params), grid.dx)


def quadratic_bounds(state, profile: ProfileField, params: PhysParams):
    """Constants (c1, c2) with c1 ||(phi, psi, zeta)||^2 <= E <= c2 ||(phi, psi, zeta)||^2.

    Taylor's theorem with Phi'' = 1/xi^2 gives, pointwise,
    R Theta Phi(v/V) = p_+ V phi^2 / (2 w^2) with w between v and V, and the
    same for the thermal part with C_v Theta / (2 w^2). Taking w at either
    end of its range bounds each weight; psi carries weight 1/2.
    """
    V, Th = profile.V, profile.Theta
    v_hi, v_lo = np.maximum(state.v, V), np.minimum(state.v, V)
    t_hi, t_lo = np.maximum(state.theta, Th), np.minimum(state.theta, Th)
    p, cv = params.p_plus, params.cv
    c1 = min(float(np.min(p * V / (2.0 * v_hi**2))), 0.5, float(np.min(cv * Th / (2.0 * t_hi**2))))
    c2 = max(float(np.max(p * V / (2.0 * v_lo**2))), 0.5, float(np.max(cv * Th / (2.0 * t_lo**2))))
    return c1, c2


# --------------------------------------------------------------------------
# Energy bookkeeping along a run


@dataclass(frozen=True)
class EnergyReport:
    """Perturbation size and accumulated integrals at one time.

    ``dissipation_accum`` integrates ||phi_x||^2 + ||(psi_x, zeta_x)||_1^2,
    split into its first-derivative and second-derivative parts as well.
    ``source_budget`` integrates |F psi| + |G zeta / theta| and
    ``weighted_gradient`` integrates Theta_x^2 (phi^2 + zeta^2).
    """

    t: float
    l2: float
    h1: float
    linf: float
    rel_entropy: float
    dissipation_accum: float
    dissipation_first: float = 0.0
    dissipation_second: float = 0.0
    source_budget: float = 0.0
    weighted_gradient: float = 0.0

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


class EnergyTracker:
    """Trapezoid-in-time accumulation of the run integrals.

    Call :meth:`sample` as often as desired (every few steps); each call
    closes one trapezoid panel from the previous sample.
    """

    def __init__(self, params: PhysParams, grid: Grid):
        self.params = params
        self.grid = grid
        self.t_last: float | None = None
        self.last: np.ndarray | None = None
        self.totals = np.zeros(4)

    def integrands(self, state, profile: ProfileField) -> np.ndarray:
        dx = self.grid.dx
        phi = state.v - profile.V
        psi = state.u - profile.U
        zeta = state.theta - profile.Theta
        first = sq_norm(d1(phi, dx), dx) + sq_norm(d1(psi, dx), dx) + sq_norm(d1(zeta, dx), dx)
        second = sq_norm(d2(psi, dx), dx) + sq_norm(d2(zeta, dx), dx)
        source = trapezoid(np.abs(profile.F * psi) + np.abs(profile.G * zeta / state.theta), dx)
        weighted = trapezoid(profile.Theta_x**2 * (phi * phi + zeta * zeta), dx)
        return np.array([first, second, source, weighted])

    def sample(self, state, profile: ProfileField):
        if self.t_last is not None and state.t == self.t_last:
            return
        f = self.integrands(state, profile)
        if self.t_last is not None:
            self.totals += 0.5 * (state.t - self.t_last) * (f + self.last)
        self.t_last, self.last = state.t, f

    def report(self, state, profile: ProfileField) -> EnergyReport:
        self.sample(state, profile)
        l2, h1, linf = norms(
            _Triple(state.v - profile.V, state.u - profile.U, state.theta - profile.Theta), self.grid
        )
        first, second, source, weighted = (float(s) for s in self.totals)
        return EnergyReport(
            t=float(state.t),
            l2=l2,
            h1=h1,
            linf=linf,
            rel_entropy=relative_entropy(state, profile, self.params, self.grid),
            dissipation_accum=first + second,
            dissipation_first=first,
            dissipation_second=second,
            source_budget=source,
            weighted_gradient=weighted,
        )


@dataclass(frozen=True)
class _Triple:
    phi: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray


# --------------------------------------------------------------------------
# Time series and power-law fits


@dataclass(frozen=True)
class DecaySeries:
    """A nonnegative quantity sampled at strictly increasing times t >= 0."""

    name: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError(f"series {self.name!r}: times and values must be 1-D of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError(f"series {self.name!r}: times must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValueError(f"series {self.name!r}: values must be finite and nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def window(self, t_lo: float, t_hi: float) -> "DecaySeries":
        m = (self.times >= t_lo) & (self.times <= t_hi)
        return DecaySeries(self.name, self.times[m], self.values[m])


@dataclass(frozen=True)
class FitResult:
    """value ~ exp(log_constant) * (1+t)^exponent over ``window``."""

    exponent: float
    log_constant: float
    rms_residual: float
    window: tuple[float, float]
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "log_constant": self.log_constant,
            "rms_residual": self.rms_residual,
            "window": list(self.window),
            "n_samples": self.n_samples,
        }


MIN_FIT_SAMPLES = 8


def fit_power_law(series: DecaySeries, window=None) -> FitResult:
    """Least-squares line through (ln(1+t), ln value) on samples inside ``window``.

    The default window is [10, t_last/3].
    """
    if window is None:
        window = (10.0, float(series.times[-1]) / 3.0 if series.times.size else 0.0)
    lo, hi = float(window[0]), float(window[1])
    sub = series.window(lo, hi)
    if sub.times.size < MIN_FIT_SAMPLES:
        raise InsufficientData(
            f"series {series.name!r} has {sub.times.size} samples in [{lo:g}, {hi:g}]; need {MIN_FIT_SAMPLES}"
        )
    if np.any(sub.values <= 0.0):
        raise NonpositiveValue(f"series {series.name!r} has non-positive values inside the fit window")
    X = np.log1p(sub.times)
    Y = np.log(sub.values)
    A = np.column_stack([X, np.ones_like(X)])
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - (slope * X + intercept)
    return FitResult(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), (lo, hi), int(X.size))


def geometric_times(t0: float, t_final: float, ratio: float = 1.25) -> np.ndarray:
    """t0 * ratio^k up to t_final, with t_final appended if it is not hit exactly."""
    n = int(math.floor(math.log(t_final / t0) / math.log(ratio) + 1e-9))
    times = t0 * ratio ** np.arange(n + 1)
    if times[-1] < t_final * (1.0 - 1e-12):
        times = np.append(times, t_final)
    return times


def running_integral(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral, zero at the first sample."""
    out = np.zeros_like(values, dtype=float)
    out[1:] = np.cumsum(0.5 * np.diff(times) * (values[1:] + values[:-1]))
    return out


def profile_decay_suite(snapshots, params: PhysParams, grid: Grid) -> dict[str, DecaySeries]:
    """Decay series of a profile history.

    ``snapshots`` holds ProfileField objects or (t, Theta) pairs, in time
    order. Running integrals are trapezoid sums over the snapshot times,
    so the history should start at t = 0 for them to be meaningful.
    """
    dx = grid.dx
    fields = [s if isinstance(s, ProfileField) else make_profile(s[1], s[0], params, grid) for s in snapshots]
    t = np.array([f.t for f in fields])
    neg = grid.x < 0.0
    pos = grid.x > 0.0

    def collect(fn):
        return np.array([fn(f) for f in fields])

    out = {
        "Theta_x": collect(lambda f: sq_norm(f.Theta_x, dx)),
        "lnTheta_x": collect(lambda f: sq_norm(f.lnTheta_x, dx)),
        "lnTheta_xx": collect(lambda f: sq_norm(f.lnTheta_xx, dx)),
        "lnTheta_xxx": collect(lambda f: sq_norm(f.lnTheta_xxx, dx)),
        "far_gap_minus": collect(lambda f: float(np.max(np.abs(f.Theta[neg] - params.theta_minus))) ** 2),
        "far_gap_plus": collect(lambda f: float(np.max(np.abs(f.Theta[pos] - params.theta_plus))) ** 2),
        "F": collect(lambda f: sq_norm(f.F, dx)),
        "G": collect(lambda f: sq_norm(f.G, dx)),
    }
    out["far_gap"] = np.maximum(out["far_gap_minus"], out["far_gap_plus"])
    out["weighted_lnTheta_xx"] = (1.0 + t) * out["lnTheta_xx"]
    out["int_lnTheta_xx"] = running_integral(t, out["lnTheta_xx"])
    out["int_lnTheta_x"] = running_integral(t, out["lnTheta_x"])
    return {name: DecaySeries(name, t, vals) for name, vals in out.items()}


# --------------------------------------------------------------------------
# Uniform-in-time bound monitor


def _late_slope_ratio(times, accum) -> float:
    """Slope of the accumulated dissipation over the last quarter divided by that over the first quarter."""
    t0, t1 = times[0], times[-1]
    q = 0.25 * (t1 - t0)
    a = np.interp([t0, t0 + q, t1 - q, t1], times, accum)
    early = (a[1] - a[0]) / q
    late = (a[3] - a[2]) / q
    if early <= 0.0:
        return 0.0 if late <= 0.0 else math.inf
    return late / early


def monotone_after_peak(times, values, window: float, tol: float = 0.01) -> tuple[bool, float]:
    """Whether the series never grows over a window of the given length once past its peak.

    Returns (passed, worst relative growth); growth within ``tol`` is allowed.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    k = int(np.argmax(values))
    worst = -math.inf
    for i in range(k, len(times)):
        end = times[i] + window
        if end > times[-1] + 1e-12:
            break
        later = float(np.interp(end, times, values))
        if values[i] > 0.0:
            worst = max(worst, later / values[i] - 1.0)
    if worst == -math.inf:
        worst = 0.0
    return worst <= tol, worst


def apriori_monitor(reports, decay_fraction: float = 0.2) -> BoundReport:
    """Summary of an EnergyReport history against a time-uniform bound.

    ``ratio`` is (sup h1 + final dissipation) / (h1(0) + 1). The dissipation
    slope over the last quarter of the run must fall below that over the
    first quarter, and the L-infinity size must drop under
    ``decay_fraction`` of its peak by the final time.
    """
    reports = list(reports)
    if not reports:
        raise InsufficientData("no energy reports")
    t = np.array([r.t for r in reports])
    h1 = np.array([r.h1 for r in reports])
    linf = np.array([r.linf for r in reports])
    diss = np.array([r.dissipation_accum for r in reports])
    sup_h1 = float(np.max(h1))
    bound_sum = sup_h1 + float(diss[-1])
    peak = float(np.max(linf))
    values = {
        "t_final": float(t[-1]),
        "h1_initial": float(h1[0]),
        "sup_h1": sup_h1,
        "dissipation": float(diss[-1]),
        "bound_sum": bound_sum,
        "ratio": bound_sum / (float(h1[0]) + 1.0),
        "linf_peak": peak,
        "linf_final": float(linf[-1]),
        "linf_final_over_peak": float(linf[-1]) / peak if peak > 0.0 else 0.0,
        "late_slope_ratio": _late_slope_ratio(t, diss) if len(t) > 1 else 0.0,
        "weighted_gradient": float(reports[-1].weighted_gradient),
        "weighted_gradient_ratio": float(reports[-1].weighted_gradient)
        / (float(reports[-1].dissipation_first) + 1.0),
    }
    mono, growth = monotone_after_peak(t, linf, 0.25 * (t[-1] - t[0])) if len(t) > 1 else (True, 0.0)
    values["max_window_growth"] = growth
    checks = {
        "dissipation_nondecreasing": bool(np.all(np.diff(diss) >= 0.0)),
        "dissipation_slope_decreasing": values["late_slope_ratio"] < 1.0 or diss[-1] == 0.0,
        "linf_decayed": peak == 0.0 or values["linf_final_over_peak"] <= decay_fraction,
        "monotone_after_peak": mono,
    }
    return BoundReport("apriori", values, checks)
