"""Sparse approximation over random overcomplete bases."""

from .core import (
    ProblemInstance,
    SparseSolution,
    SupportMask,
    distortion,
    generate_instance,
    ls_refit,
)
from .exceptions import (
    BranchError,
    BudgetError,
    ConvergenceError,
    DivergenceError,
    FitError,
    InputError,
    OCBError,
    OverlapError,
    ParameterError,
    PlateauError,
    RangeError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "ProblemInstance",
    "SparseSolution",
    "SupportMask",
    "distortion",
    "generate_instance",
    "ls_refit",
    "BranchError",
    "BudgetError",
    "ConvergenceError",
    "DivergenceError",
    "FitError",
    "InputError",
    "OCBError",
    "OverlapError",
    "ParameterError",
    "PlateauError",
    "RangeError",
    "ShapeError",
]
