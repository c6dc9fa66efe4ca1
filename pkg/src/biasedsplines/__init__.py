"""Biased Riemannian splines: Hamiltonian shooting, collocation and geometry tools."""

from .benchmarks import BENCHMARK_NAMES, benchmark
from .errors import (BiasedSplineError, ConfigError, DimensionError, GeometryError, IntegrationDivergence,
                     NonInvertibleMetricError, SystemSpecError)
from .hamiltonian import ExtendedState, HamiltonianTrajectory, integrate
from .solvers import (FREE, BoundaryProblem, SolverReport, solve, solve_collocation, solve_geodesic,
                      solve_spline_shooting, sup_distance)
from .systems import BUILTIN_NAMES, SystemDefinition, builtin, system_from_expressions

__all__ = [
    "BENCHMARK_NAMES", "BUILTIN_NAMES", "FREE", "BiasedSplineError", "BoundaryProblem", "ConfigError",
    "DimensionError", "ExtendedState", "GeometryError", "HamiltonianTrajectory", "IntegrationDivergence",
    "NonInvertibleMetricError", "SolverReport", "SystemDefinition", "SystemSpecError", "benchmark", "builtin",
    "integrate", "solve", "solve_collocation", "solve_geodesic", "solve_spline_shooting", "sup_distance",
    "system_from_expressions",
]
