"""Finite difference solver for multi-term time-fractional (generalized
Oldroyd-B) diffusion problems in two space dimensions."""

from fracflow.grid import GridField, UniformGrid2D
from fracflow.kernels import FracOrder, SubOneKernel, sub_one_weights, super_one_weights
from fracflow.problem import (
    BoundarySpec,
    MultiTermProblem,
    Term,
    example1_problem,
    heat_equation_problem,
    manufactured_problem,
    oldroyd_to_multiterm,
    validate,
)
from fracflow.scheme import RunRecord, assemble_matrix, assemble_rhs, run, step

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec",
    "FracOrder",
    "GridField",
    "MultiTermProblem",
    "RunRecord",
    "SubOneKernel",
    "Term",
    "UniformGrid2D",
    "assemble_matrix",
    "assemble_rhs",
    "example1_problem",
    "heat_equation_problem",
    "manufactured_problem",
    "oldroyd_to_multiterm",
    "run",
    "step",
    "sub_one_weights",
    "super_one_weights",
    "validate",
]
