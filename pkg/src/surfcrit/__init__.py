"""Critical points of semilinear Dirichlet problems on the sphere and hyperbolic plane."""

from .surface import HYPERBOLIC, SPHERE, SurfaceModel

__all__ = ["SPHERE", "HYPERBOLIC", "SurfaceModel"]
__version__ = "0.1.0"
