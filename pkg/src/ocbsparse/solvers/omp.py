"""Orthogonal matching pursuit at a fixed rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..core import ProblemInstance, SparseSolution, SupportMask, distortion
from ..exceptions import ParameterError
from ..validation import rate_to_count


@dataclass(frozen=True)
class OmpPath:
    """Per-step record: chosen column, its correlation and the residual norm after refit."""

    selected: np.ndarray
    max_corr: np.ndarray
    residual_norms: np.ndarray


def omp_arrays(A, y, k, *, return_path=False):
    """Greedy selection of ``k`` columns with an LS refit after every step.

    The refit is kept as an incrementally grown Cholesky factor of the selected
    Gram block. Ties in the argmax go to the lowest column index.
    """
    M, N = A.shape
    if not 0 <= k <= min(M, N):
        raise ParameterError(f"k must lie in [0, min(M, N)] = [0, {min(M, N)}], got {k}")
    Aty = A.T @ y
    selected = np.empty(k, dtype=np.intp)
    used = np.zeros(N, dtype=bool)
    L = np.zeros((k, k))
    coef = np.zeros(0)
    res = y.copy()
    corrs, norms = np.empty(k), np.empty(k)
    for n in range(k):
        score = np.abs(A.T @ res)
        score[used] = -1.0
        j = int(np.argmax(score))
        corrs[n] = score[j]
        a = A[:, j]
        if n:
            S = selected[:n]
            w = linalg.solve_triangular(L[:n, :n], A[:, S].T @ a, lower=True, check_finite=False)
            d2 = float(a @ a - w @ w)
            L[n, :n] = w
        else:
            d2 = float(a @ a)
        selected[n] = j
        used[j] = True
        S = selected[: n + 1]
        if d2 <= 1e-13 * float(a @ a):
            # Column already in the span: min-norm refit, residual is unchanged.
            coef = linalg.lstsq(A[:, S], y, cond=1e-12, check_finite=False)[0]
            L[n, n] = np.sqrt(max(d2, 1e-300))
        else:
            L[n, n] = np.sqrt(d2)
            Ln = L[: n + 1, : n + 1]
            z = linalg.solve_triangular(Ln, Aty[S], lower=True, check_finite=False)
            coef = linalg.solve_triangular(Ln.T, z, lower=False, check_finite=False)
        res = y - A[:, S] @ coef
        norms[n] = np.linalg.norm(res)
    x = np.zeros(N)
    x[selected] = coef
    if return_path:
        return x, OmpPath(selected, corrs, norms)
    return x


def omp(inst: ProblemInstance, r, *, return_path=False):
    """Run ``rM`` OMP iterations on ``inst``.

    Returns
    -------
    SparseSolution
        The final iterate ``x^(rM)`` and its distortion. With
        ``return_path=True`` an :class:`OmpPath` is returned as well.
    """
    k = rate_to_count(r, inst.M)
    x, path = omp_arrays(inst.A, inst.y, k, return_path=True)
    mask = SupportMask.from_indices(path.selected, inst.N)
    sol = SparseSolution(x=x, support=mask, epsilon=distortion(inst, x))
    return (sol, path) if return_path else sol
