"""Contact-wave profile and perturbed compressible flow in Lagrangian coordinates.

Builds the smooth contact-wave profile from a nonlinear diffusion equation,
evolves the full viscous heat-conducting flow from perturbed data, and
measures the norms, bounds and decay rates of the perturbation.
"""

from .errors import ContactWaveError
from .params import Grid, PhysParams

__all__ = ["ContactWaveError", "Grid", "PhysParams"]
__version__ = "0.1.0"
