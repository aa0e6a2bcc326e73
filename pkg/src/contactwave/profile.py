"""Contact-wave profile: explicit initial temperature, its nonlinear diffusion,
the derived (V, U) fields, the defect sources (F, G) and a heat-kernel
reference solution of the linear equation with the same data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc, erfcinv

from .errors import GridTooCoarse, InvalidParams, QuadratureNotConverged, StepRejected
from .fd import d1, d2, sq_norm, trapezoid
from .params import Grid, PhysParams
from .records import BoundReport

SQRT_PI = math.sqrt(math.pi)


def k_map(x):
    """ln(x + sqrt(1 + x^2)), evaluated as an odd function of |x|.

    Writing it through log1p of |x| avoids the cancellation that the
    literal formula suffers for large negative x.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.log1p(ax + ax * ax / (1.0 + np.sqrt(1.0 + ax * ax)))
        large = math.log(2.0) + np.log(np.where(ax > 0, ax, 1.0))
    k = np.where(ax < 1e8, small, large)
    out = np.copysign(k, x)
    return out[()] if out.ndim == 0 else out


def _far_powers(params: PhysParams) -> tuple[float, float]:
    n = params.inv_delta0
    return params.theta_plus**n, params.theta_minus**n


def h_function(x, params: PhysParams):
    """Theta_0^(1/delta0), built from erfc on each half-line.

    The erfc form keeps full relative precision in the far tails where
    the erf form would cancel.
    """
    top, bottom = _far_powers(params)
    jump = top - bottom
    x = np.asarray(x, dtype=float)
    k = np.abs(k_map(x))
    tail = 0.5 * jump * erfc(k)
    return np.where(x < 0, bottom + tail, top - tail)


def theta0(x, params: PhysParams, strict: bool = False):
    """Initial temperature profile connecting theta_- (x -> -inf) to theta_+."""
    if strict and params.theta_minus >= params.theta_plus:
        raise InvalidParams("strict ordering requires theta_minus < theta_plus")
    h = h_function(x, params)
    out = np.exp(params.delta0 * np.log(h))
    return out[()] if np.ndim(out) == 0 else out


def theta0_x(x, params: PhysParams):
    """Closed-form derivative of theta0 (used to check the grid derivatives)."""
    top, bottom = _far_powers(params)
    x = np.asarray(x, dtype=float)
    h = h_function(x, params)
    k = k_map(x)
    hx = (top - bottom) / SQRT_PI * np.exp(-k * k) / np.sqrt(1.0 + x * x)
    return params.delta0 * np.exp(params.delta0 * np.log(h)) / h * hx


def theta0_support(params: PhysParams, tol: float) -> tuple[float, float]:
    """Interval outside which |theta0 - theta_+-| <= tol.

    Uses |Theta_0 - theta_s| <= theta_s |jump| erfc(|K|) / (2 H_s), which
    follows from |(1+y)^delta - 1| <= |y| for 0 < delta <= 1.
    """
    top, bottom = _far_powers(params)
    jump = abs(top - bottom)
    if jump == 0.0:
        return 0.0, 0.0
    ends = []
    for theta_s, h_s in ((params.theta_minus, bottom), (params.theta_plus, top)):
        target = 2.0 * tol * h_s / (theta_s * jump)
        k = 0.0 if target >= 1.0 else float(erfcinv(max(target, 1e-300)))
        ends.append(math.sinh(k))
    return -ends[0], ends[1]


def theta0_grid(params: PhysParams, dx: float, tol: float = 1e-12, min_half_width: float = 10.0) -> Grid:
    """Grid wide enough that theta0 is within ``tol`` of its limits at both ends."""
    lo, hi = theta0_support(params, tol)
    half = max(min_half_width, -lo, hi)
    return Grid.from_spacing(half, dx)


# --------------------------------------------------------------------------
# Bounds on the initial data


_BOUND_KEYS = (
    "l1_theta0_x",
    "sup_theta0_x",
    "sq_theta0_x",
    "sq_lntheta0_xx",
    "sq_lntheta0_xxx",
    "l1_theta0_minus",
    "l1_theta0_plus",
)


def _theta0_quantities(params: PhysParams, grid: Grid) -> dict[str, float]:
    x, dx = grid.x, grid.dx
    th = theta0(x, params)
    thx = d1(th, dx)
    lnth = np.log(th)
    lxx = d2(lnth, dx)
    lxxx = d1(lxx, dx)
    left = np.where(x <= 0, np.abs(th - params.theta_minus), 0.0)
    right = np.where(x >= 0, np.abs(th - params.theta_plus), 0.0)
    return {
        "l1_theta0_x": trapezoid(np.abs(thx), dx),
        "sup_theta0_x": float(np.max(np.abs(thx))),
        "sq_theta0_x": sq_norm(thx, dx),
        "sq_lntheta0_xx": sq_norm(lxx, dx),
        "sq_lntheta0_xxx": sq_norm(lxxx, dx),
        "l1_theta0_minus": trapezoid(left, dx),
        "l1_theta0_plus": trapezoid(right, dx),
    }


def verify_theta0_bounds(params: PhysParams, grid: Grid, tolerance: float = 0.05) -> BoundReport:
    """Measure the initial-data norms on ``grid`` and on a twice-finer grid.

    Raises GridTooCoarse when any value moves by more than ``tolerance``
    (relative) under the refinement. The finer-grid values are reported.
    """
    coarse = _theta0_quantities(params, grid)
    fine = _theta0_quantities(params, grid.refined())
    for key in _BOUND_KEYS:
        a, b = coarse[key], fine[key]
        scale = max(abs(a), abs(b))
        if scale > 1e-14 and abs(a - b) > tolerance * scale:
            raise GridTooCoarse(
                f"{key} changed from {a:.6g} to {b:.6g} when dx was halved "
                f"(limit {tolerance:.0%}); refine the grid"
            )
    report = BoundReport("theta0_bounds", dict(fine))
    report.values["delta0"] = params.delta0
    report.values["dx"] = grid.refined().dx
    report.checks["l1_equals_jump"] = abs(fine["l1_theta0_x"] - abs(params.theta_plus - params.theta_minus)) <= 1e-6
    return report


# --------------------------------------------------------------------------
# Profile fields


@dataclass(frozen=True)
class ProfileField:
    """Profile (V, U, Theta) at one time with derivatives and defect sources."""

    t: float
    Theta: np.ndarray
    Theta_x: np.ndarray
    lnTheta_x: np.ndarray
    lnTheta_xx: np.ndarray
    lnTheta_xxx: np.ndarray
    V: np.ndarray
    V_x: np.ndarray
    U: np.ndarray
    U_x: np.ndarray
    F: np.ndarray | None = None
    G: np.ndarray | None = None


def log_derivatives(theta: np.ndarray, dx: float):
    """(ln Theta)_x, (ln Theta)_xx, (ln Theta)_xxx; the second derivative is the compact second difference."""
    ln = np.log(theta)
    lxx = d2(ln, dx)
    return d1(ln, dx), lxx, d1(lxx, dx)


def profile_from_theta(theta: np.ndarray, params: PhysParams, grid: Grid):
    """V = R Theta / p_+ and U = c (ln Theta)_x with c = kappa (gamma-1)/(gamma R).

    Returns (V, V_x, U, U_x). U is pinned to zero on the two end nodes,
    where Theta is held at its far-field values.
    """
    if np.any(theta <= 0.0):
        raise InvalidParams("Theta must be strictly positive")
    dx = grid.dx
    lx, lxx, _ = log_derivatives(theta, dx)
    c = params.velocity_coefficient
    V = params.R * theta / params.p_plus
    V_x = params.R * d1(theta, dx) / params.p_plus
    U = c * lx
    U[0] = U[-1] = 0.0
    U_x = c * lxx
    return V, V_x, U, U_x


def source_terms(field: ProfileField, params: PhysParams, grid: Grid):
    """Defect sources (F, G) left over when the profile is inserted in the flow equations.

    F = c (a - mu p_+/R) ((ln Theta)_xx / Theta)_x, obtained from
    U_t - mu (U_x / V)_x with (ln Theta)_t = a (ln Theta)_xx / Theta.
    G = -mu U_x^2 / V <= 0.
    """
    F = params.defect_coefficient * d1(field.lnTheta_xx / field.Theta, grid.dx)
    G = -params.mu * field.U_x**2 / field.V
    return F, G


def make_profile(theta: np.ndarray, t: float, params: PhysParams, grid: Grid) -> ProfileField:
    theta = np.array(theta, dtype=float)
    lx, lxx, lxxx = log_derivatives(theta, grid.dx)
    V, V_x, U, U_x = profile_from_theta(theta, params, grid)
    field = ProfileField(
        t=float(t),
        Theta=theta,
        Theta_x=d1(theta, grid.dx),
        lnTheta_x=lx,
        lnTheta_xx=lxx,
        lnTheta_xxx=lxxx,
        V=V,
        V_x=V_x,
        U=U,
        U_x=U_x,
    )
    F, G = source_terms(field, params, grid)
    return replace(field, F=F, G=G)


def initial_theta(params: PhysParams, grid: Grid) -> np.ndarray:
    """theta0 on the grid with the end nodes pinned to theta_-+."""
    th = np.array(theta0(grid.x, params), dtype=float)
    th[0], th[-1] = params.theta_minus, params.theta_plus
    return th


def initial_profile(params: PhysParams, grid: Grid) -> ProfileField:
    return make_profile(initial_theta(params, grid), 0.0, params, grid)


# --------------------------------------------------------------------------
# Nonlinear diffusion Theta_t = a (ln Theta)_xx


def theta_rhs(theta: np.ndarray, params: PhysParams, dx: float):
    """Flux-form right-hand side and the net boundary inflow a[(ln Theta)_x]_{-L}^{L}."""
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.diff(np.log(theta)) / dx
    rhs = np.zeros_like(theta)
    rhs[1:-1] = params.a * (g[1:] - g[:-1]) / dx
    return rhs, params.a * (g[-1] - g[0])


def theta_dt_cap(theta: np.ndarray, params: PhysParams, dx: float, safety: float = 0.4) -> float:
    """Explicit step cap safety * dx^2 * min(Theta) / a."""
    return safety * dx * dx * float(np.min(theta)) / params.a


def heun_theta(theta: np.ndarray, dt: float, params: PhysParams, dx: float):
    """One Heun step; returns (new Theta, boundary inflow integrated over the step)."""
    k1, f1 = theta_rhs(theta, params, dx)
    stage = theta + dt * k1
    if not np.all(np.isfinite(stage)) or np.any(stage <= 0.0):
        raise StepRejected("Theta lost positivity in the predictor stage")
    k2, f2 = theta_rhs(stage, params, dx)
    new = theta + 0.5 * dt * (k1 + k2)
    if not np.all(np.isfinite(new)) or np.any(new <= 0.0):
        raise StepRejected("Theta lost positivity")
    return new, 0.5 * dt * (f1 + f2)


def evolve_theta(field: ProfileField, dt: float, params: PhysParams, grid: Grid) -> ProfileField:
    """Advance the profile one step and rebuild every derived array."""
    cap = theta_dt_cap(field.Theta, params, grid.dx)
    if dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the explicit cap {cap:.3e}")
    new, _ = heun_theta(field.Theta, dt, params, grid.dx)
    return make_profile(new, field.t + dt, params, grid)


@dataclass
class ThetaRun:
    """Output of :func:`run_theta`: snapshots and the flux audit."""

    fields: list[ProfileField]
    boundary_inflow: list[float]
    mass_change: list[float]
    steps: int
    rejected: int


def run_theta(
    params: PhysParams,
    grid: Grid,
    output_times,
    theta_init: np.ndarray | None = None,
    safety: float = 0.4,
    max_halvings: int = 12,
) -> ThetaRun:
    """Integrate the profile equation, landing exactly on each output time.

    ``boundary_inflow[k]`` is the time-integrated flux a[(ln Theta)_x] up
    to ``output_times[k]``; ``mass_change[k]`` is the change of the
    trapezoid integral of Theta over the same interval.
    """
    theta = initial_theta(params, grid) if theta_init is None else np.array(theta_init, dtype=float)
    dx = grid.dx
    mass0 = trapezoid(theta, dx)
    t = 0.0
    inflow = 0.0
    steps = rejected = 0
    fields, inflows, masses = [], [], []
    for t_out in sorted(float(s) for s in output_times):
        while t < t_out:
            remaining = t_out - t
            dt = min(theta_dt_cap(theta, params, dx, safety), remaining)
            for _ in range(max_halvings + 1):
                try:
                    theta_new, flux = heun_theta(theta, dt, params, dx)
                    break
                except StepRejected:
                    rejected += 1
                    dt *= 0.5
            else:
                raise StepRejected(f"step at t={t:.6g} rejected {max_halvings + 1} times")
            theta = theta_new
            inflow += flux
            steps += 1
            t = t_out if dt == remaining else t + dt
        fields.append(make_profile(theta, t, params, grid))
        inflows.append(inflow)
        masses.append(trapezoid(theta, dx) - mass0)
    return ThetaRun(fields, inflows, masses, steps, rejected)


# --------------------------------------------------------------------------
# Linear heat-kernel reference


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre settings for the heat-kernel integral.

    Panel widths grow linearly away from the origin (``grade``) because
    theta0 varies on the scale sqrt(1 + x^2), but never exceed
    ``kernel_fraction`` kernel widths. ``window`` is the half-width of
    the kernel support kept, in units of sqrt(4 a t).
    """

    order: int = 16
    base_width: float = 0.5
    grade: float = 0.25
    kernel_fraction: float = 0.5
    window: float = 8.0
    rtol: float = 1e-8
    tail_tol: float = 1e-17
    max_refinements: int = 4
    chunk: int = 512


def _panel_edges(extent: float, base: float, grade: float, cap: float) -> np.ndarray:
    edges = [0.0]
    h = 0.0
    while h < extent:
        h += min(max(base, grade * h), cap)
        edges.append(min(h, extent))
    return np.array(edges)


def _gl_nodes(lo: float, hi: float, spec: QuadratureSpec, scale: float, sigma: float):
    s, w = np.polynomial.legendre.leggauss(spec.order)
    cap = spec.kernel_fraction * sigma / scale
    nodes, weights = [], []
    for sign, extent in ((-1.0, -lo), (1.0, hi)):
        if extent <= 0.0:
            continue
        e = _panel_edges(extent, spec.base_width / scale, spec.grade / scale, cap)
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        nodes.append(sign * (mid[:, None] + half[:, None] * s[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    h = np.concatenate(nodes)
    wt = np.concatenate(weights)
    order = np.argsort(h)
    return h[order], wt[order]


def _theta2_once(x, sigma, params, spec, lo, hi, scale):
    h, w = _gl_nodes(lo, hi, spec, scale, sigma)
    dev = theta0(h, params) - np.where(h < 0, params.theta_minus, params.theta_plus)
    wd = w * dev / (sigma * SQRT_PI)
    reach = spec.window * sigma
    out = np.empty_like(x)
    for start in range(0, x.size, spec.chunk):
        xs = x[start:start + spec.chunk]
        i0 = np.searchsorted(h, xs.min() - reach)
        i1 = np.searchsorted(h, xs.max() + reach)
        if i1 <= i0:
            out[start:start + spec.chunk] = 0.0
            continue
        z = (h[None, i0:i1] - xs[:, None]) / sigma
        out[start:start + spec.chunk] = np.exp(-z * z) @ wd[i0:i1]
    return out


def heat_kernel_theta2(x, t: float, params: PhysParams, spec: QuadratureSpec | None = None):
    """Solution at time t of theta_t = a theta_xx with initial data theta0.

    The step from theta_- to theta_+ is convolved in closed form (erfc);
    the localized remainder theta0 - step is integrated numerically over
    the kernel window. The result is accepted when halving every panel
    moves it by at most ``rtol`` times the jump |theta_+ - theta_-|.
    """
    if t <= 0.0:
        raise ValueError("heat kernel needs t > 0")
    spec = spec or QuadratureSpec()
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    jump = params.theta_plus - params.theta_minus
    sigma = math.sqrt(4.0 * params.a * t)
    step = params.theta_minus + 0.5 * jump * erfc(-xa / sigma)
    if jump == 0.0:
        out = step
    else:
        lo, hi = theta0_support(params, spec.tail_tol * abs(jump))
        prev = _theta2_once(xa, sigma, params, spec, lo, hi, 1.0)
        change = math.inf
        for level in range(1, spec.max_refinements + 1):
            cur = _theta2_once(xa, sigma, params, spec, lo, hi, 2.0**level)
            change = float(np.max(np.abs(cur - prev)))
            if change <= spec.rtol * abs(jump):
                break
            prev = cur
        else:
            raise QuadratureNotConverged(
                f"heat-kernel quadrature at t={t:g} still moved by {change:.3e} after "
                f"{spec.max_refinements} refinements"
            )
        out = step + cur
    return float(out[0]) if np.ndim(x) == 0 else out
