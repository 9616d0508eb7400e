"""Small-alpha behaviour of the three trade-off curves and the basis size it implies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InputError, OCBError, ParameterError, PlateauError
from ..validation import check_interval, check_positive
from .l0 import entropy_curve_l0
from .l1 import l1ls_from_rate


@dataclass(frozen=True)
class AsymptoticsReport:
    """Trade-off values along an ``alpha`` sweep at fixed rate.

    ``eps0_slope`` is the least-squares slope of ``ln eps0`` against
    ``ln alpha`` over ``slope_window``; ``eps1_plateau_ratio`` compares
    ``eps1`` at the smallest ``alpha`` with ``(1-r)^2 sigma_y2 / 2``;
    ``eps1ls_lnalpha`` holds ``eps1_ls * |ln alpha|`` and
    ``eps1ls_decade_ratios`` its ratio between points one decade apart.
    """

    r: float
    sigma_y2: float
    alphas: np.ndarray
    eps0: np.ndarray
    eps1: np.ndarray
    eps1ls: np.ndarray
    eps0_slope: float
    eps0_slope_stderr: float
    eps0_slope_theory: float
    slope_window: tuple
    eps1_plateau: float
    eps1_plateau_ratio: float
    eps1ls_lnalpha: np.ndarray
    eps1ls_decade_ratios: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                v = [None if not np.isfinite(x) else float(x) for x in v]
            elif isinstance(v, float) and not math.isfinite(v):
                v = None
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        out["partial"] = self.partial
        return out


def _slope(x, y):
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    if x.size > 2:
        res = y - X @ coef
        s2 = float(res @ res) / (x.size - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        return float(coef[1]), float(np.sqrt(cov[1, 1]))
    return float(coef[1]), float("nan")


def asymptotics_alpha_to_zero(r, sigma_y2=1.0, alphas=None, *, slope_window=(1e-3, 1e-2),
                              include=("l0", "l1", "l1ls")):
    """Solve all three equation-of-state systems along decreasing ``alpha``.

    Parameters
    ----------
    r : float
        Rate held fixed along the sweep.
    sigma_y2 : float
    alphas : array, optional
        Values in ``[1e-4, 1e-1]``; defaults to 4 points per decade over that range.
    slope_window : (float, float)
        ``alpha`` interval used for the ``eps0`` power-law fit.
    include : tuple of str
        Subset of ``{"l0", "l1", "l1ls"}`` to compute.

    Returns
    -------
    AsymptoticsReport
        Points that failed to solve are NaN and listed in ``failures``.
    """
    r = check_interval(r, "r", 0.0, 1.0, closed_hi=False)
    s2 = check_positive(sigma_y2, "sigma_y2")
    if alphas is None:
        alphas = np.logspace(-1, -4, 13)
    alphas = np.sort(np.asarray(alphas, dtype=float))[::-1]
    if alphas.size == 0:
        raise InputError("alpha grid is empty")
    if alphas.min() < 1e-4 * (1 - 1e-9) or alphas.max() > 1e-1 * (1 + 1e-9):
        raise ParameterError("alphas must lie within [1e-4, 1e-1]")
    n = alphas.size
    eps0, eps1, eps1ls = (np.full(n, np.nan) for _ in range(3))
    failures = []
    for i, a in enumerate(alphas):
        if "l0" in include:
            try:
                eps0[i] = entropy_curve_l0(a, r, s2).epsilon0
            except OCBError as exc:
                failures.append({"alpha": float(a), "system": "l0", "error": str(exc)})
        if "l1" in include or "l1ls" in include:
            try:
                p, e = l1ls_from_rate(a, r, s2)
                eps1[i], eps1ls[i] = p.base.epsilon, e
            except OCBError as exc:
                failures.append({"alpha": float(a), "system": "l1", "error": str(exc)})

    lo, hi = slope_window
    sel = (alphas >= lo * (1 - 1e-9)) & (alphas <= hi * (1 + 1e-9)) & np.isfinite(eps0)
    if sel.sum() >= 2:
        slope, se = _slope(np.log(alphas[sel]), np.log(eps0[sel]))
    else:
        slope, se = float("nan"), float("nan")

    plateau = 0.5 * (1.0 - r) ** 2 * s2
    j = int(np.argmin(alphas))
    prod = eps1ls * np.abs(np.log(alphas))
    ratios = []
    for i, a in enumerate(alphas):
        k = np.flatnonzero(np.isclose(alphas, a / 10.0, rtol=1e-9))
        if k.size:
            ratios.append(prod[k[0]] / prod[i])
    return AsymptoticsReport(
        r=r, sigma_y2=s2, alphas=alphas, eps0=eps0, eps1=eps1, eps1ls=eps1ls,
        eps0_slope=slope, eps0_slope_stderr=se, eps0_slope_theory=2.0 * r / (1.0 - r),
        slope_window=(float(lo), float(hi)), eps1_plateau=plateau,
        eps1_plateau_ratio=float(eps1[j] / plateau), eps1ls_lnalpha=prod,
        eps1ls_decade_ratios=np.array(ratios), failures=failures,
    )


@dataclass(frozen=True)
class BasisSizeEstimate:
    """Basis size needed for a target distortion, known only up to a constant factor."""

    method: str
    log_n_required: float
    exponent: float | None
    up_to_constant: bool = True

    @property
    def n_required(self) -> float:
        return math.exp(self.log_n_required) if self.log_n_required < 709 else math.inf


def required_basis_size(target_eps, M, r, method) -> BasisSizeEstimate:
    """Scaling of the basis size with the target distortion as ``alpha -> 0``.

    ``l0``: ``N ~ M * eps^{-(1-r)/(2r)}`` (polynomial growth).
    ``l1ls``: ``N ~ M * exp(1/eps)`` (exponential growth).
    ``l1`` has a positive distortion floor, so no basis size reaches below it.

    Raises
    ------
    PlateauError
        For ``method="l1"``.
    """
    eps = check_positive(target_eps, "target_eps")
    M = check_positive(M, "M")
    r = check_interval(r, "r", 0.0, 1.0, closed_hi=False)
    if method == "l0":
        expo = (1.0 - r) / (2.0 * r)
        return BasisSizeEstimate("l0", math.log(M) - expo * math.log(eps), expo)
    if method == "l1ls":
        return BasisSizeEstimate("l1ls", math.log(M) + 1.0 / eps, None)
    if method == "l1":
        raise PlateauError(
            "plain l1 distortion tends to (1-r)^2 sigma_y2 / 2 as alpha -> 0; "
            "no finite basis size reaches below that plateau"
        )
    raise ParameterError(f"method must be one of l0, l1ls, l1; got {method!r}")
