"""Boundary-driven lattice gases: kinetic Monte Carlo, hydrodynamics and large-deviation functionals."""
from .errors import LatgasError, NumericalFailure, ValidationError
from .models import Boundary, Periodic, TransportModel, builtin_model, check_conditions
from .pde import Grid, GridFunction, SpaceTimePath, solve_continuity, solve_heat, solve_hydro

__version__ = "0.1.0"

__all__ = [
    "LatgasError", "NumericalFailure", "ValidationError",
    "Boundary", "Periodic", "TransportModel", "builtin_model", "check_conditions",
    "Grid", "GridFunction", "SpaceTimePath", "solve_continuity", "solve_heat", "solve_hydro",
]
