"""Physical constants and the truncated spatial mesh."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import InvalidParams


def parse_delta0(value) -> float:
    """Accept ``1/9``-style strings, Fractions or floats and return a float.

    The reciprocal must be an odd positive integer.
    """
    if isinstance(value, str):
        try:
            frac = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParams(f"delta0 '{value}' is not a rational number") from exc
        value = float(frac)
    value = float(value)
    check_delta0(value)
    return value


def check_delta0(delta0: float) -> int:
    """Return ``1/delta0`` as an int, or raise if it is not an odd positive integer."""
    if not (math.isfinite(delta0) and 0.0 < delta0 <= 1.0):
        raise InvalidParams(f"delta0 must lie in (0, 1], got {delta0!r}")
    recip = 1.0 / delta0
    n = round(recip)
    if abs(recip - n) > 1e-9 * n or n % 2 == 0:
        raise InvalidParams(
            f"delta0 must be 1/(2k+1); 1/delta0 = {recip:.12g} is not an odd integer"
        )
    return n


@dataclass(frozen=True)
class PhysParams:
    """Gas, transport and far-field constants.

    ``v_minus`` follows from equal far-field pressure, so it is derived
    rather than stored.
    """

    R: float = 1.0
    gamma: float = 5.0 / 3.0
    mu: float = 1.0
    kappa: float = 1.0
    theta_minus: float = 0.5
    theta_plus: float = 1.0
    v_plus: float = 1.0
    delta0: float = 1.0 / 9.0

    def __post_init__(self):
        for name in ("R", "mu", "kappa", "theta_minus", "theta_plus", "v_plus"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise InvalidParams(f"{name} must be strictly positive, got {val!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise InvalidParams(f"gamma must exceed 1, got {self.gamma!r}")
        check_delta0(self.delta0)

    @property
    def v_minus(self) -> float:
        return self.v_plus * self.theta_minus / self.theta_plus

    @property
    def p_plus(self) -> float:
        return self.R * self.theta_plus / self.v_plus

    @property
    def a(self) -> float:
        """Diffusion coefficient of the temperature profile equation."""
        return self.kappa * self.p_plus * (self.gamma - 1.0) / (self.gamma * self.R**2)

    @property
    def cv(self) -> float:
        return self.R / (self.gamma - 1.0)

    @property
    def inv_delta0(self) -> int:
        return check_delta0(self.delta0)

    @property
    def theta_min(self) -> float:
        return min(self.theta_minus, self.theta_plus)

    @property
    def theta_max(self) -> float:
        return max(self.theta_minus, self.theta_plus)

    @property
    def velocity_coefficient(self) -> float:
        """kappa (gamma-1) / (gamma R): U = coefficient * (ln Theta)_x."""
        return self.kappa * (self.gamma - 1.0) / (self.gamma * self.R)

    @property
    def defect_coefficient(self) -> float:
        """Prefactor of ((ln Theta)_xx / Theta)_x in the momentum defect F."""
        return self.velocity_coefficient * (self.a - self.mu * self.p_plus / self.R)

    def far_field_sound_speed(self) -> float:
        """Largest Lagrangian sound speed sqrt(gamma R theta)/v over the two far fields."""
        return max(
            math.sqrt(self.gamma * self.R * th) / v
            for th, v in ((self.theta_minus, self.v_minus), (self.theta_plus, self.v_plus))
        )

    def replace(self, **changes) -> "PhysParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "gamma": self.gamma,
            "mu": self.mu,
            "kappa": self.kappa,
            "theta_minus": self.theta_minus,
            "theta_plus": self.theta_plus,
            "v_plus": self.v_plus,
            "delta0": self.delta0,
        }


def defect_free_viscosity(params: PhysParams) -> float:
    """Viscosity for which the momentum defect F vanishes identically (mu = a R / p_+)."""
    return params.a * params.R / params.p_plus


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [-L, L] with ``n_nodes`` nodes, both ends included."""

    half_width: float
    n_nodes: int

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0.0):
            raise InvalidParams(f"half_width must be positive, got {self.half_width!r}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 64:
            raise InvalidParams(f"n_nodes must be an integer >= 64, got {self.n_nodes!r}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n_nodes - 1)

    @cached_property
    def x(self) -> np.ndarray:
        # (j - m) dx with m = (N-1)/2 keeps the nodes exactly antisymmetric
        x = (np.arange(self.n_nodes, dtype=float) - 0.5 * (self.n_nodes - 1)) * self.dx
        x[0], x[-1] = -self.half_width, self.half_width
        x.flags.writeable = False
        return x

    def refined(self, levels: int = 1) -> "Grid":
        """Same interval with dx halved ``levels`` times; coarse nodes stay nodes."""
        n = self.n_nodes
        for _ in range(levels):
            n = 2 * n - 1
        return Grid(self.half_width, n)

    @classmethod
    def from_spacing(cls, half_width: float, dx: float) -> "Grid":
        n = int(math.ceil(2.0 * half_width / dx)) + 1
        return cls(half_width, max(n, 64))


def diffusion_half_width(params: PhysParams, t_final: float, factor: float = 10.0) -> float:
    """Domain half-width L >= factor * sqrt(4 a T / theta_min)."""
    return factor * math.sqrt(4.0 * params.a * t_final / params.theta_min)
