"""Viscous heat-conducting flow in Lagrangian mass coordinates.

    v_t - u_x = 0
    u_t + (R theta / v)_x = mu (u_x / v)_x
    C_v theta_t + R theta u_x / v = kappa (theta_x / v)_x + mu u_x^2 / v

The solver advances the conserved triple (v, u, E = C_v theta + u^2/2) in
flux form on a collocated grid, with face fluxes built from centered
differences, Heun time stepping and Dirichlet pins on the two end nodes.
Perturbations against the contact-wave profile are always obtained by
subtraction, never stepped on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, BudgetExceeded, InvalidInitialData, StepRejected, TimeMismatch
from .fd import d1, sq_norm
from .params import Grid, PhysParams
from .profile import ProfileField, heun_theta, initial_profile, make_profile, theta_dt_cap

SHAPES = ("none", "gaussian", "cosine", "random")


@dataclass(frozen=True)
class FlowField:
    t: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class Perturbation:
    t: float
    phi: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray


@dataclass(frozen=True)
class InitialData:
    """Shape and size of the initial perturbation (phi_0, psi_0, zeta_0).

    ``gaussian``: amp * exp(-((x - center)/width)^2).
    ``cosine``: amp * (1 + cos(pi (x - center)/width)) / 2 on |x - center| < width.
    ``random``: a few random Fourier modes under a Gaussian envelope of
    the given width, scaled so that max |.| equals amp; drawn from ``seed``.
    """

    shape: str = "none"
    amp_phi: float = 0.0
    amp_psi: float = 0.0
    amp_zeta: float = 0.0
    center: float = 0.0
    width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidInitialData(f"unknown perturbation shape {self.shape!r}; expected one of {SHAPES}")
        if not self.width > 0.0:
            raise InvalidInitialData("perturbation width must be positive")

    def scaled(self, factor: float) -> "InitialData":
        from dataclasses import replace

        return replace(
            self,
            amp_phi=self.amp_phi * factor,
            amp_psi=self.amp_psi * factor,
            amp_zeta=self.amp_zeta * factor,
        )

    @property
    def max_amplitude(self) -> float:
        return max(abs(self.amp_phi), abs(self.amp_psi), abs(self.amp_zeta))

    def extent(self) -> float:
        """Distance from the center beyond which the perturbation is negligible."""
        if self.shape == "cosine":
            return self.width
        return 6.0 * self.width


def _shape_values(spec: InitialData, x: np.ndarray, amp: float, rng) -> np.ndarray:
    if spec.shape == "none" or amp == 0.0:
        return np.zeros_like(x)
    s = (x - spec.center) / spec.width
    if spec.shape == "gaussian":
        return amp * np.exp(-s * s)
    if spec.shape == "cosine":
        return np.where(np.abs(s) < 1.0, 0.5 * amp * (1.0 + np.cos(np.pi * s)), 0.0)
    n_modes = 6
    k = rng.uniform(0.2, 2.0, n_modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_modes)
    weight = rng.normal(size=n_modes)
    f = np.exp(-s * s) * np.sum(weight[:, None] * np.cos(k[:, None] * s[None, :] + phase[:, None]), axis=0)
    return amp * f / np.max(np.abs(f))


def perturbation_arrays(spec: InitialData, grid: Grid):
    """(phi_0, psi_0, zeta_0) on the grid, exactly zero on the end nodes."""
    rng = np.random.default_rng(spec.seed)
    out = []
    for amp in (spec.amp_phi, spec.amp_psi, spec.amp_zeta):
        f = _shape_values(spec, grid.x, amp, rng)
        f[0] = f[-1] = 0.0
        out.append(f)
    return tuple(out)


def make_initial(profile0: ProfileField, spec: InitialData, grid: Grid) -> FlowField:
    phi, psi, zeta = perturbation_arrays(spec, grid)
    v = profile0.V + phi
    u = profile0.U + psi
    theta = profile0.Theta + zeta
    if np.any(v <= 0.0) or np.any(theta <= 0.0):
        raise InvalidInitialData("initial specific volume and temperature must stay positive")
    return FlowField(profile0.t, v, u, theta)


# --------------------------------------------------------------------------
# Spatial operator


@dataclass
class Fluxes:
    """Net boundary fluxes (right face minus left face) of mass, momentum and energy.

    With these, d/dt sum(q) dx = -(flux_right - flux_left) for each conserved q.
    """

    mass: float
    momentum: float
    energy: float


def flow_rhs(v, u, energy, params: PhysParams, dx: float):
    """Time derivatives of (v, u, E) and the boundary fluxes.

    Face values are two-point averages, face gradients are two-point
    differences, so each interior update is a flux difference.
    """
    mu, kappa = params.mu, params.kappa
    theta = (energy - 0.5 * u * u) / params.cv
    p = params.R * theta / v
    vh = 0.5 * (v[1:] + v[:-1])
    uh = 0.5 * (u[1:] + u[:-1])
    pu = p * u
    visc = mu * np.diff(u) / (dx * vh)
    f_v = -uh
    f_u = 0.5 * (p[1:] + p[:-1]) - visc
    f_e = 0.5 * (pu[1:] + pu[:-1]) - uh * visc - kappa * np.diff(theta) / (dx * vh)
    rv = np.zeros_like(v)
    ru = np.zeros_like(u)
    re = np.zeros_like(energy)
    rv[1:-1] = -np.diff(f_v) / dx
    ru[1:-1] = -np.diff(f_u) / dx
    re[1:-1] = -np.diff(f_e) / dx
    return (rv, ru, re), Fluxes(f_v[-1] - f_v[0], f_u[-1] - f_u[0], f_e[-1] - f_e[0])


def total_energy(u, theta, params: PhysParams):
    return params.cv * theta + 0.5 * u * u


def stable_dt(v, u, theta, params: PhysParams, dx: float, safety: float = 0.3) -> float:
    """safety * min(dx^2 min(v) min(1/mu, C_v/kappa), dx / c_max).

    c_max is the largest Lagrangian sound speed sqrt(gamma R theta) / v.
    """
    diffusive = dx * dx * float(np.min(v)) * min(1.0 / params.mu, params.cv / params.kappa)
    c_max = float(np.max(np.sqrt(params.gamma * params.R * theta) / v))
    return safety * min(diffusive, dx / c_max)


def _check(v, theta, where):
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(theta))):
        raise StepRejected(f"non-finite values in {where}")
    if np.any(v <= 0.0) or np.any(theta <= 0.0):
        raise StepRejected(f"specific volume or temperature lost positivity in {where}")


def heun_flow(v, u, theta, dt, params: PhysParams, dx: float):
    """One Heun step. Returns (v, u, theta) and the step-integrated boundary fluxes."""
    e = total_energy(u, theta, params)
    (kv1, ku1, ke1), f1 = flow_rhs(v, u, e, params, dx)
    v1, u1, e1 = v + dt * kv1, u + dt * ku1, e + dt * ke1
    _check(v1, (e1 - 0.5 * u1 * u1) / params.cv, "the predictor stage")
    (kv2, ku2, ke2), f2 = flow_rhs(v1, u1, e1, params, dx)
    h = 0.5 * dt
    vn = v + h * (kv1 + kv2)
    un = u + h * (ku1 + ku2)
    en = e + h * (ke1 + ke2)
    thn = (en - 0.5 * un * un) / params.cv
    _check(vn, thn, "the corrector stage")
    flux = Fluxes(h * (f1.mass + f2.mass), h * (f1.momentum + f2.momentum), h * (f1.energy + f2.energy))
    return (vn, un, thn), flux


def step_flow(state: FlowField, dt: float, params: PhysParams, grid: Grid) -> FlowField:
    """Advance the full system by one step of size dt.

    Raises StepRejected if positivity or finiteness is lost.
    """
    (v, u, theta), _ = heun_flow(state.v, state.u, state.theta, dt, params, grid.dx)
    return FlowField(state.t + dt, v, u, theta)


# --------------------------------------------------------------------------
# Perturbations


def perturbation_of(state: FlowField, profile: ProfileField, tol: float = 1e-9) -> Perturbation:
    if abs(state.t - profile.t) > tol:
        raise TimeMismatch(f"state at t={state.t!r} but profile at t={profile.t!r}")
    return Perturbation(state.t, state.v - profile.V, state.u - profile.U, state.theta - profile.Theta)


def reconstruct(pert: Perturbation, profile: ProfileField) -> FlowField:
    return FlowField(pert.t, profile.V + pert.phi, profile.U + pert.psi, profile.Theta + pert.zeta)


def _spatial_terms(state: FlowField, prof: ProfileField, params: PhysParams, dx: float):
    """Everything in the perturbation system except the time derivatives, moved to one side.

    Returns (S1, S2, S3) such that phi_t = S1, psi_t = S2, C_v zeta_t = S3.
    """
    R, mu, kappa = params.R, params.mu, params.kappa
    v, u, theta = state.v, state.u, state.theta
    V, U, Th = prof.V, prof.U, prof.Theta
    phi, psi, zeta = v - V, u - U, theta - Th
    vV = v * V
    psi_x = d1(psi, dx)
    U_x = d1(U, dx)
    u_x = d1(u, dx)
    Th_x = d1(Th, dx)
    s1 = psi_x
    s2 = (
        d1(R * Th * phi / vV, dx)
        - d1(R * zeta / v, dx)
        - mu * d1(U_x * phi / vV, dx)
        + mu * d1(psi_x / v, dx)
        - prof.F
    )
    s3 = (
        -(R * theta / v) * (psi_x + U_x)
        + (R * Th / V) * U_x
        + kappa * d1(d1(zeta, dx) / v, dx)
        - kappa * d1(Th_x * phi / vV, dx)
        + mu * (u_x**2 / v - U_x**2 / V)
        - prof.G
    )
    return s1, s2, s3


def perturbation_residual(
    state0: FlowField,
    profile0: ProfileField,
    state1: FlowField,
    profile1: ProfileField,
    params: PhysParams,
    grid: Grid,
    margin: int = 3,
):
    """Discrete residual of the perturbation system between two snapshots.

    Time derivatives are one-sided differences across the pair and every
    spatial term is averaged over the pair, so the check is second order
    at the midpoint. ``margin`` nodes at each end are zeroed, where the
    pinned boundary values and one-sided stencils meet.
    """
    dt = state1.t - state0.t
    if dt <= 0.0:
        raise TimeMismatch("second snapshot must be later than the first")
    for s, p in ((state0, profile0), (state1, profile1)):
        if abs(s.t - p.t) > 1e-9 * max(1.0, abs(s.t)):
            raise TimeMismatch(f"state at t={s.t!r} paired with profile at t={p.t!r}")
    p0 = perturbation_of(state0, profile0)
    p1 = perturbation_of(state1, profile1)
    a = _spatial_terms(state0, profile0, params, grid.dx)
    b = _spatial_terms(state1, profile1, params, grid.dx)
    r1 = (p1.phi - p0.phi) / dt - 0.5 * (a[0] + b[0])
    r2 = (p1.psi - p0.psi) / dt - 0.5 * (a[1] + b[1])
    r3 = params.cv * (p1.zeta - p0.zeta) / dt - 0.5 * (a[2] + b[2])
    for r in (r1, r2, r3):
        r[:margin] = 0.0
        r[-margin:] = 0.0
    return r1, r2, r3


def residual_norm(residual, grid: Grid, half_width: float | None = None) -> float:
    """Combined L2 norm of the residual triple, optionally restricted to |x| <= half_width."""
    mask = 1.0 if half_width is None else (np.abs(grid.x) <= half_width)
    return math.sqrt(sum(sq_norm(r * mask, grid.dx) for r in residual))


# --------------------------------------------------------------------------
# Coupled driver


@dataclass
class ConservationAudit:
    """Per-run bookkeeping of the discrete conservation identities.

    ``mass_max_rel`` is the worst single-step mismatch between the change
    of sum(v) dx and the boundary flux, relative to sum(v) dx. The
    momentum/energy entries accumulate the same mismatch over all steps.
    """

    mass_max_rel: float = 0.0
    momentum_defect: float = 0.0
    energy_defect: float = 0.0
    momentum_scale: float = 0.0
    energy_scale: float = 0.0
    elapsed: float = 0.0

    def momentum_rel_per_time(self) -> float:
        if self.elapsed == 0.0 or self.momentum_scale == 0.0:
            return 0.0
        return abs(self.momentum_defect) / (self.momentum_scale * self.elapsed)

    def energy_rel_per_time(self) -> float:
        if self.elapsed == 0.0 or self.energy_scale == 0.0:
            return 0.0
        return abs(self.energy_defect) / (self.energy_scale * self.elapsed)

    def to_dict(self) -> dict:
        return {
            "mass_max_rel": float(self.mass_max_rel),
            "momentum_rel_per_time": float(self.momentum_rel_per_time()),
            "energy_rel_per_time": float(self.energy_rel_per_time()),
            "elapsed": float(self.elapsed),
        }


@dataclass
class CoupledSolver:
    """Full flow and profile advanced in lockstep on one grid.

    Both share every time stamp, so perturbations are available at any
    step. ``dt_min`` bounds the adaptive halving of rejected steps.
    """

    params: PhysParams
    grid: Grid
    initial: InitialData = field(default_factory=InitialData)
    safety: float = 0.3
    dt_min: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        prof = initial_profile(self.params, self.grid)
        state = make_initial(prof, self.initial, self.grid)
        self.t = 0.0
        self.theta_profile = prof.Theta.copy()
        self.v, self.u, self.theta = state.v.copy(), state.u.copy(), state.theta.copy()
        self.steps = 0
        self.rejected = 0
        dx = self.grid.dx
        self.audit = ConservationAudit(
            momentum_scale=float(np.sum(np.abs(self.u))) * dx,
            energy_scale=float(np.sum(total_energy(self.u, self.theta, self.params))) * dx,
        )
        self._profile_cache = prof

    # snapshots --------------------------------------------------------

    def state(self) -> FlowField:
        return FlowField(self.t, self.v.copy(), self.u.copy(), self.theta.copy())

    def profile(self) -> ProfileField:
        if self._profile_cache is None or self._profile_cache.t != self.t:
            self._profile_cache = make_profile(self.theta_profile, self.t, self.params, self.grid)
        return self._profile_cache

    def perturbation(self) -> Perturbation:
        return perturbation_of(self.state(), self.profile())

    # stepping ---------------------------------------------------------

    def max_dt(self) -> float:
        dx = self.grid.dx
        return min(
            stable_dt(self.v, self.u, self.theta, self.params, dx, self.safety),
            theta_dt_cap(self.theta_profile, self.params, dx),
        )

    def step(self, dt: float) -> float:
        """Take one step of at most dt, halving on rejection. Returns the dt used."""
        dx = self.grid.dx
        while True:
            try:
                (v, u, th), flux = heun_flow(self.v, self.u, self.theta, dt, self.params, dx)
                theta_p, _ = heun_theta(self.theta_profile, dt, self.params, dx)
                break
            except StepRejected:
                self.rejected += 1
                dt *= 0.5
                if dt < self.dt_min:
                    raise BlowUp(f"dt fell below {self.dt_min:g} at t={self.t:.6g}")
        self._audit(v, u, th, flux)
        self.v, self.u, self.theta, self.theta_profile = v, u, th, theta_p
        self.t += dt
        self.steps += 1
        self._profile_cache = None
        return dt

    def _audit(self, v, u, th, flux: Fluxes):
        dx = self.grid.dx
        a = self.audit
        mass_old = float(np.sum(self.v)) * dx
        mass_new = float(np.sum(v)) * dx
        a.mass_max_rel = max(a.mass_max_rel, abs((mass_new - mass_old) + flux.mass) / abs(mass_old))
        a.momentum_defect += (float(np.sum(u)) - float(np.sum(self.u))) * dx + flux.momentum
        e_old = float(np.sum(total_energy(self.u, self.theta, self.params))) * dx
        e_new = float(np.sum(total_energy(u, th, self.params))) * dx
        a.energy_defect += (e_new - e_old) + flux.energy

    def advance_to(self, t_end: float, callback=None, every: int = 1):
        """Step until t == t_end exactly; ``callback(self)`` runs every ``every`` steps."""
        while self.t < t_end:
            if self.steps >= self.max_steps:
                raise BudgetExceeded(f"step budget {self.max_steps} exhausted at t={self.t:.6g}")
            remaining = t_end - self.t
            dt = min(self.max_dt(), remaining)
            used = self.step(dt)
            if used == remaining:
                self.t = t_end
            self.audit.elapsed = self.t
            if callback is not None and self.steps % every == 0:
                callback(self)
