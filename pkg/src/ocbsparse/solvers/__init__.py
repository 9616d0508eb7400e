"""Sparse selection methods: exhaustive l0, LASSO, OMP and AMP."""

from .amp import AmpState, amp, amp_arrays
from .estimators import ApproximateMessagePassing, ExhaustiveL0, LassoCD, OrthogonalMatchingPursuit
from .exhaustive import EntropyHistogram, exhaustive_search
from .lasso import LassoDiagnostics, lambda_max, lasso_arrays, lasso_solve, tune_lambda
from .omp import OmpPath, omp, omp_arrays

__all__ = [
    "AmpState",
    "amp",
    "amp_arrays",
    "ApproximateMessagePassing",
    "ExhaustiveL0",
    "LassoCD",
    "OrthogonalMatchingPursuit",
    "EntropyHistogram",
    "exhaustive_search",
    "LassoDiagnostics",
    "lambda_max",
    "lasso_arrays",
    "lasso_solve",
    "tune_lambda",
    "OmpPath",
    "omp",
    "omp_arrays",
]
