"""LASSO by cyclic coordinate descent, and lambda tuning to a target rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..core import ProblemInstance, SparseSolution, SupportMask, distortion
from ..exceptions import ConvergenceError, ParameterError, RangeError
from ..validation import check_positive

LAMBDA_FLOOR = 1e-6


@dataclass(frozen=True)
class LassoDiagnostics:
    lam: float
    iterations: int
    kkt_residual: float
    support_size: int


@njit(cache=True)
def _kkt(G, Aty, x, lam):
    N = x.shape[0]
    c = Aty.copy()
    for j in range(N):
        if x[j] != 0.0:
            for i in range(N):
                c[i] -= G[i, j] * x[j]
    worst = 0.0
    for i in range(N):
        if x[i] == 0.0:
            v = abs(c[i]) - lam
        elif x[i] > 0.0:
            v = abs(c[i] - lam)
        else:
            v = abs(c[i] + lam)
        if v > worst:
            worst = v
    return worst, c


@njit(cache=True)
def _cd_kernel(G, Aty, x, lam, tol, max_sweeps):
    """Cyclic coordinate descent on ``0.5 x'Gx - Aty'x + lam |x|_1``.

    ``c = Aty - G x`` is updated incrementally and refreshed from scratch at
    every KKT check to stop drift.
    """
    N = x.shape[0]
    worst, c = _kkt(G, Aty, x, lam)
    if worst <= tol:
        return 0, worst
    for sweep in range(1, max_sweeps + 1):
        for j in range(N):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = x[j]
            z = c[j] + gjj * old
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            if new != old:
                d = new - old
                for i in range(N):
                    c[i] -= G[j, i] * d
                x[j] = new
        worst, c = _kkt(G, Aty, x, lam)
        if worst <= tol:
            return sweep, worst
    return max_sweeps, worst


def lambda_max(A, y) -> float:
    """Smallest ``lam`` giving the empty support, ``max_i |a_i' y|``."""
    return float(np.max(np.abs(A.T @ y))) if A.shape[1] else 0.0


def lasso_arrays(A, y, lam, tol=1e-9, max_sweeps=100_000, x0=None, gram=None):
    """Array-level LASSO solve; returns ``(x, sweeps, kkt_residual)``."""
    lam = check_positive(lam, "lambda")
    tol = check_positive(tol, "tol")
    A = np.ascontiguousarray(A, dtype=float)
    G = np.ascontiguousarray(A.T @ A if gram is None else gram)
    Aty = A.T @ np.asarray(y, dtype=float)
    x = np.zeros(A.shape[1]) if x0 is None else np.array(x0, dtype=float)
    sweeps, kkt = _cd_kernel(G, Aty, x, lam, tol, int(max_sweeps))
    if kkt > tol:
        raise ConvergenceError(
            f"coordinate descent stopped after {sweeps} sweeps with KKT residual {kkt:.3e} > {tol:.1e}",
            best=x, trace=[kkt],
        )
    return x, sweeps, kkt


def lasso_solve(inst: ProblemInstance, lam, tol=1e-9, *, max_sweeps=100_000, x0=None):
    """Minimize ``0.5 ||y - A xi||^2 + lam ||xi||_1``.

    Parameters
    ----------
    inst : ProblemInstance
    lam : float
        Regularization coefficient, > 0.
    tol : float
        Bound on the KKT residual at return.
    max_sweeps : int
        Cap on full coordinate sweeps.
    x0 : array, optional
        Warm start.

    Returns
    -------
    SparseSolution, LassoDiagnostics
        ``epsilon`` is the distortion of the shrunk LASSO coefficients, before any refit.
    """
    x, sweeps, kkt = lasso_arrays(inst.A, inst.y, lam, tol, max_sweeps, x0)
    mask = SupportMask(x != 0)
    sol = SparseSolution(x=x, support=mask, epsilon=distortion(inst, x))
    return sol, LassoDiagnostics(float(lam), int(sweeps), float(kkt), mask.k)


def tune_lambda(inst: ProblemInstance, target_r, tol_r=None, *, tol=1e-9, return_trace=False):
    """Find ``lam`` whose LASSO support size is within ``tol_r * M`` of ``target_r * M``.

    Bisection in ``log(lam)`` over ``[1e-6, lam_max]``, warm-starting each solve
    from the previous one. ``tol_r`` defaults to half a coefficient, so an
    integral target must be hit exactly.
    """
    M, N = inst.M, inst.N
    if not (0 <= target_r < min(1.0, N / M)):
        raise ParameterError(f"target_r must lie in [0, min(1, N/M)), got {target_r!r}")
    tol_k = 0.5 if tol_r is None else check_positive(tol_r, "tol_r", strict=False) * M
    k_target = target_r * M
    G = inst.A.T @ inst.A
    trace = []
    warm = {}

    def size(lam):
        near = min(warm, key=lambda l: abs(math.log(l / lam)), default=None)
        x, _, _ = lasso_arrays(inst.A, inst.y, lam, tol, x0=warm.get(near), gram=G)
        warm[lam] = x
        k = int(np.count_nonzero(x))
        trace.append((lam, k))
        return k

    def done(lam):
        return (lam, trace) if return_trace else lam

    hi = lambda_max(inst.A, inst.y)
    trace.append((hi, 0))
    if abs(k_target) <= tol_k:
        return done(hi)
    # Bracket by halving from lam_max so that tiny lambdas are only visited when needed.
    lo = hi
    while True:
        lo = max(lo / 2, LAMBDA_FLOOR)
        k_lo = size(lo)
        if abs(k_lo - k_target) <= tol_k:
            return done(lo)
        if k_lo > k_target:
            break
        if lo == LAMBDA_FLOOR:
            raise RangeError(f"support size {k_lo} at lambda={lo} cannot reach target {k_target:g}")
        hi = lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        k = size(mid)
        if abs(k - k_target) <= tol_k:
            return done(mid)
        if k > k_target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-12:
            break
    raise RangeError(
        f"support size jumps over the target {k_target:g} near lambda={hi:.6g}; loosen tol_r"
    )
