"""Finite-size extrapolation and bootstrap intervals for ensemble medians."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import make_rng
from .exceptions import FitError, InputError, ParameterError, ShapeError
from .validation import as_samples, check_interval

FORMS = ("linear_invM", "stirling")


@dataclass(frozen=True)
class SizeSeries:
    """Per-size medians with their confidence bounds."""

    M_values: np.ndarray
    medians: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    quantity: str = ""

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, f), dtype=float)
                for f in ("M_values", "medians", "ci_lo", "ci_hi")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ShapeError("SizeSeries fields must be equal-length vectors")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ParameterError("M_values must be strictly increasing")
        if np.any(arrs[2] > arrs[1]) or np.any(arrs[1] > arrs[3]):
            raise ParameterError("need ci_lo <= median <= ci_hi for every size")
        for f, a in zip(("M_values", "medians", "ci_lo", "ci_hi"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, f, a)

    @classmethod
    def from_samples(cls, M_values, samples, quantity="", *, B=1000, level=0.95, seed=0):
        """Build a series from per-size sample vectors via :func:`bootstrap_median_ci`."""
        rows = [bootstrap_median_ci(s, B, level, seed=seed) for s in samples]
        med, lo, hi = (np.array(c) for c in zip(*rows))
        return cls(np.asarray(M_values, dtype=float), med, lo, hi, quantity)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "median", "lo", "hi"])
        for row in zip(self.M_values, self.medians, self.ci_lo, self.ci_hi):
            w.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class Extrapolation:
    """Least-squares fit in ``1/M``; ``intercept`` is the ``M -> inf`` value."""

    form: str
    params: np.ndarray
    cov: np.ndarray
    residuals: np.ndarray
    design: np.ndarray

    @property
    def intercept(self) -> float:
        return float(self.params[0])

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.cov[0, 0])) if np.isfinite(self.cov[0, 0]) else float("nan")

    def predict(self, M):
        return _design(np.atleast_1d(np.asarray(M, dtype=float)), self.form) @ self.params

    def to_dict(self) -> dict:
        se = np.sqrt(np.diag(self.cov))
        return {"form": self.form, "intercept": self.intercept, "stderr": self.stderr,
                "params": [float(v) for v in self.params],
                "param_stderr": [float(v) if np.isfinite(v) else None for v in se]}


def _design(M, form):
    inv = 1.0 / M
    if form == "linear_invM":
        return np.column_stack([np.ones_like(inv), inv])
    if form == "stirling":
        return np.column_stack([np.ones_like(inv), inv, inv * np.log(inv)])
    raise ParameterError(f"form must be one of {FORMS}, got {form!r}")


def extrapolate(series, form="linear_invM", values=None) -> Extrapolation:
    """Fit ``a + b/M`` (``linear_invM``) or ``a + b/M + c (1/M) ln(1/M)`` (``stirling``).

    Parameters
    ----------
    series : SizeSeries or array of M
        Sizes and medians. A bare array of sizes may be combined with ``values``.
    form : {"linear_invM", "stirling"}
    values : array, optional

    Raises
    ------
    FitError
        Too few sizes for the form, or a rank-deficient design.
    """
    if isinstance(series, SizeSeries):
        M, y = series.M_values, series.medians
    else:
        M = np.asarray(series, dtype=float)
        y = np.asarray(values, dtype=float)
    if M.shape != y.shape or M.ndim != 1:
        raise ShapeError("sizes and values must be equal-length vectors")
    X = _design(M, form)
    need = 3 if form == "linear_invM" else 4
    if M.size < need:
        raise FitError(f"form {form!r} needs at least {need} sizes, got {M.size}")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise FitError("rank-deficient design (repeated sizes?)")
    params, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ params
    dof = M.size - X.shape[1]
    s2 = float(res @ res) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return Extrapolation(form, params, cov, res, X)


def bootstrap_median_ci(samples, B=1000, level=0.95, *, seed=0):
    """Median with a percentile-bootstrap interval.

    Parameters
    ----------
    samples : array
    B : int
        Resamples, at least 200.
    level : float
        Coverage in (0, 1).
    seed : int

    Returns
    -------
    (median, lo, hi)
    """
    x = as_samples(samples)
    if int(B) != B or B < 200:
        raise ParameterError(f"B must be an integer >= 200, got {B!r}")
    level = check_interval(level, "level", 0.0, 1.0, closed_hi=False)
    med = float(np.median(x))
    rng = make_rng(seed)
    meds = np.empty(int(B))
    chunk = max(1, 2_000_000 // x.size)
    for s in range(0, int(B), chunk):
        n = min(chunk, int(B) - s)
        meds[s:s + n] = np.median(x[rng.integers(0, x.size, size=(n, x.size))], axis=1)
    lo, hi = np.quantile(meds, [(1 - level) / 2, (1 + level) / 2])
    return med, float(min(lo, med)), float(max(hi, med))


def read_samples_csv(text):
    """Parse ``M,value`` rows into ``(M_values, [samples per M])``."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise InputError("no data rows")
    data = {}
    for r in rows:
        data.setdefault(float(r[0]), []).append(float(r[1]))
    Ms = sorted(data)
    return np.array(Ms), [np.array(data[m]) for m in Ms]


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False
