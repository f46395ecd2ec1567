"""Decoupled, mass-conservative block-centered finite difference solver for
the 2D Keller-Segel chemotaxis system on general non-uniform staggered grids.
"""

from .grid import (
    Axis1D,
    StaggeredGrid2D,
    build_corner_refined,
    build_middle_refined,
    build_random_perturbed,
    build_uniform,
    make_grid,
)
from .fields import CellField, EdgeFieldX, EdgeFieldY, GradientPair
from .problems import PROBLEMS, ProblemSpec, get_problem
from .scheme import (
    BlowUpDetected,
    RunResult,
    SchemeConfig,
    State,
    StepDiagnostics,
    StepSolveError,
    error_norms,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "Axis1D",
    "StaggeredGrid2D",
    "build_uniform",
    "build_random_perturbed",
    "build_middle_refined",
    "build_corner_refined",
    "make_grid",
    "CellField",
    "EdgeFieldX",
    "EdgeFieldY",
    "GradientPair",
    "ProblemSpec",
    "PROBLEMS",
    "get_problem",
    "SchemeConfig",
    "State",
    "StepDiagnostics",
    "RunResult",
    "BlowUpDetected",
    "StepSolveError",
    "run",
    "error_norms",
    "__version__",
]
