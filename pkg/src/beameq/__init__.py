"""Self-consistent equilibria of two-species relativistic charged-particle beams.

The package solves the coupled field equations for the density potentials
of a positively and a negatively charged species under either the
Thomas-Fermi (Fermi-Dirac) or the classical Bennett closure, on a disk or
in radial symmetry. Every solution can be checked against exact integral
identities that equilibria must satisfy.
"""

from .config import BeamConfig, PlanarOptions, SolverOptions, load_config, parse_config
from .coupling import coupling_matrix, solve_conformal_line_densities
from .diagnostics import DiagnosticsReport, diagnose
from .errors import BeamError
from .planar import solve_planar
from .radial import (RadialProfile, integrate_profile, solve_equilibrium,
                     solve_equilibrium_conformal)
from .species import Model, SpeciesModel, SpeciesParams

__version__ = "0.1.0"

__all__ = [
    "BeamConfig",
    "PlanarOptions",
    "SolverOptions",
    "load_config",
    "parse_config",
    "coupling_matrix",
    "solve_conformal_line_densities",
    "DiagnosticsReport",
    "diagnose",
    "BeamError",
    "solve_planar",
    "RadialProfile",
    "integrate_profile",
    "solve_equilibrium",
    "solve_equilibrium_conformal",
    "Model",
    "SpeciesModel",
    "SpeciesParams",
]
