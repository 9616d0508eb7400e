"""Input validation helpers used across the package."""

from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import InputError, ParameterError, ShapeError

_INT_TOL = 1e-9


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ParameterError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ParameterError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ParameterError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_interval(value, name, lo, hi, *, closed_lo=False, closed_hi=True):
    value = check_positive(value, name, strict=False) if lo >= 0 else float(value)
    ok_lo = value >= lo if closed_lo else value > lo
    ok_hi = value <= hi if closed_hi else value < hi
    if not (ok_lo and ok_hi):
        lb = "[" if closed_lo else "("
        rb = "]" if closed_hi else ")"
        raise ParameterError(f"{name} must lie in {lb}{lo}, {hi}{rb}, got {value!r}")
    return value


def exact_int(value, name):
    """Return ``round(value)`` if *value* is integral to 1e-9, else raise."""
    nearest = round(value)
    if abs(value - nearest) > _INT_TOL * max(1.0, abs(value)):
        raise ParameterError(f"{name} = {value!r} is not an integer")
    return int(nearest)


def rate_to_count(r, M):
    """Number of retained coefficients ``k = r*M``; non-integral products are rejected."""
    r = check_positive(r, "r", strict=False)
    return exact_int(r * M, f"r*M (r={r}, M={M})")


def as_vector(x, name, length=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise ShapeError(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def as_samples(samples, name="samples"):
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(samples)):
        raise InputError(f"{name} contains non-finite values")
    return samples
