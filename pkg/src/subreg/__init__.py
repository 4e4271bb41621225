"""Online maximization of monotone DR-submodular functions over polytopes."""

from .core import Box, GeometryConstants, Polytope, Rng, dominance_meet_join, rng_uniform
from .polytope import contains, diameter_upper_bound, linear_maximize, project, radius_upper_bound

__version__ = "0.1.0"

__all__ = [
    "Box", "GeometryConstants", "Polytope", "Rng", "contains", "diameter_upper_bound",
    "dominance_meet_join", "linear_maximize", "project", "radius_upper_bound", "rng_uniform",
]
