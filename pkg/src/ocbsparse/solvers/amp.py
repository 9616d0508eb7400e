"""Approximate message passing for the LASSO, with damping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ProblemInstance, SparseSolution, SupportMask, distortion
from ..exceptions import ConvergenceError, DivergenceError, ParameterError
from ..validation import check_interval, check_positive


@dataclass(frozen=True)
class AmpState:
    x: np.ndarray
    chi: float
    r_vec: np.ndarray
    Q_hat: float
    iterations: int


def _soft(h, lam):
    return np.sign(h) * np.maximum(np.abs(h) - lam, 0.0)


def amp_arrays(A, Y, lam, delta=0.5, tol=1e-10, max_iter=100_000):
    """Run AMP on every column of ``Y`` (shape ``(M, B)``) against one basis ``A``.

    Columns are frozen individually once ``||x^(n) - x^(n-1)||_inf <= tol``.
    The returned coefficients are the undamped threshold map of the final
    iterate, ``soft(h, lam) / Q_hat``, so entries off the support are exactly zero.

    Returns
    -------
    X : ndarray, shape (N, B)
    chi, Q_hat : ndarray, shape (B,)
    R : ndarray, shape (M, B)
        Onsager-corrected residuals.
    iters : ndarray of int, shape (B,)
    """
    lam = check_positive(lam, "lambda")
    delta = check_interval(delta, "delta", 0.0, 1.0)
    tol = check_positive(tol, "tol")
    A = np.asarray(A, dtype=float)
    Y = np.asarray(Y, dtype=float)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    M, N = A.shape
    B = Y.shape[1]
    X = np.zeros((N, B))
    chi = np.zeros(B)
    R = Y.copy()
    X_out = np.zeros((N, B))
    Qh_out = np.ones(B)
    iters = np.zeros(B, dtype=int)
    limit = 1e6 * np.linalg.norm(Y, axis=0)
    live = np.arange(B)
    for n in range(1, max_iter + 1):
        Xl, Rl, cl, Yl = X[:, live], R[:, live], chi[live], Y[:, live]
        Qh = 1.0 / (1.0 + cl)
        Rl = (1.0 - Qh) * Rl + Qh * (Yl - A @ Xl)
        H = A.T @ Rl + Qh * Xl
        T = _soft(H, lam)
        cl = (1.0 - delta) * cl + delta / Qh * np.count_nonzero(T, axis=0) / M
        Xn = (1.0 - delta) * Xl + delta / Qh * T
        change = np.max(np.abs(Xn - Xl), axis=0) if N else np.zeros(live.size)
        big = np.linalg.norm(Xn, axis=0) > limit[live]
        if np.any(big) or not np.all(np.isfinite(Xn)):
            raise DivergenceError(
                f"AMP diverged at iteration {n}; retry with a smaller delta (now {delta})",
                best=Xn, trace=list(change),
            )
        X[:, live], R[:, live], chi[live] = Xn, Rl, cl
        done = change <= tol
        if np.any(done):
            idx = live[done]
            X_out[:, idx] = T[:, done] / Qh[done]
            Qh_out[idx] = 1.0 / (1.0 + cl[done])
            iters[idx] = n
            live = live[~done]
            if live.size == 0:
                break
    else:
        raise ConvergenceError(
            f"AMP did not reach tol={tol:g} in {max_iter} iterations for {live.size} column(s)",
            best=X, trace=[],
        )
    if squeeze:
        return X_out[:, 0], chi[0], R[:, 0], Qh_out[0], int(iters[0])
    return X_out, chi, R, Qh_out, iters


def amp(inst: ProblemInstance, lam, delta=0.5, tol=1e-10, *, max_iter=100_000):
    """AMP iteration on a single instance.

    Parameters
    ----------
    inst : ProblemInstance
    lam : float
        Regularization coefficient.
    delta : float
        Damping factor in (0, 1].
    tol : float
        Stop once successive iterates differ by at most ``tol`` in the sup norm.

    Returns
    -------
    SparseSolution, AmpState
    """
    if inst.N == 0:
        raise ParameterError("empty basis")
    x, chi, r_vec, Qh, it = amp_arrays(inst.A, inst.y, lam, delta, tol, max_iter)
    sol = SparseSolution(x=x, support=SupportMask(x != 0), epsilon=distortion(inst, x))
    return sol, AmpState(x=sol.x, chi=float(chi), r_vec=r_vec, Q_hat=float(Qh), iterations=it)
