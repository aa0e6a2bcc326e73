"""Second-order finite differences and grid quadrature.

Interior nodes use centered stencils; the two end nodes use one-sided
second-order stencils.
"""

import numpy as np


def d1(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.empty_like(f, dtype=float)
    g[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    g[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return g


def d2(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.empty_like(f, dtype=float)
    g[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (dx * dx)
    g[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (dx * dx)
    g[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (dx * dx)
    return g


def trapezoid(f: np.ndarray, dx: float) -> float:
    return float(np.trapezoid(f, dx=dx))


def sq_norm(f: np.ndarray, dx: float) -> float:
    """Squared L2 norm by the trapezoid rule."""
    return trapezoid(f * f, dx)
