"""Minimal graphs over Riemannian chart metrics: solver, barriers, gradient estimates and oracles."""

from __future__ import annotations

__version__ = "0.1.0"

from .fields import Mesh, ScalarField, box_mesh, polar_mesh  # noqa: E402
from .metric import (ChartMetric, CurvatureBounds, DomainError, euclidean, flat_polar,  # noqa: E402
                     hyperbolic_disk, hyperbolic_disk_ball, hyperbolic_polar, metric_from_config)
from .solver import DirichletProblem, Solution, SolverConfig, continuation_solve, newton_solve  # noqa: E402

__all__ = [
    "__version__",
    "Mesh",
    "ScalarField",
    "box_mesh",
    "polar_mesh",
    "ChartMetric",
    "CurvatureBounds",
    "DomainError",
    "euclidean",
    "flat_polar",
    "hyperbolic_disk",
    "hyperbolic_disk_ball",
    "hyperbolic_polar",
    "metric_from_config",
    "DirichletProblem",
    "Solution",
    "SolverConfig",
    "continuation_solve",
    "newton_solve",
]
