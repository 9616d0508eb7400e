"""Multi-histogram (WHAM) estimate of the cumulant-generating function from an exchange MC run."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..exceptions import ConvergenceError, OverlapError, ParameterError
from .chains import McRun, TemperatureLadder


@dataclass(frozen=True)
class WhamResult:
    mu_grid: np.ndarray
    phi0: np.ndarray
    epsilon: np.ndarray
    entropy: np.ndarray
    log_z: np.ndarray
    iterations: int
    residual: float


def _check_overlap(E):
    T = E.shape[1]
    for t in range(T - 1):
        if E[:, t].min() > E[:, t + 1].max() or E[:, t + 1].min() > E[:, t].max():
            raise OverlapError(f"energy histograms of temperatures {t} and {t + 1} do not overlap",
                               pair=(t, t + 1))


def _log_denominator(f, mus, logN, E):
    # ln D_n = ln sum_s N_s exp(f_s - mu_s E_n)
    return logsumexp(logN[None, :] + f[None, :] - mus[None, :] * E[:, None], axis=1)


def solve_wham(E_unique, weights, mus, counts, *, tol=1e-10, max_iter=10_000):
    """Dimensionless free energies ``f_t = -ln Z(mu_t)`` (gauge ``f_0 = 0``).

    Newton steps on the convex multi-state objective bring the iterate close,
    then the self-consistent equations are iterated until the largest change
    falls below ``tol`` relative to ``1 + |f|``.

    Returns
    -------
    f : ndarray
    iterations : int
    residual : float
        Final self-consistency residual.
    """
    T = mus.size
    logN = np.log(counts.astype(float))
    logw = np.log(weights.astype(float))
    f = np.zeros(T)
    it = 0

    def sc_update(f):
        lnD = _log_denominator(f, mus, logN, E_unique)
        lnZ = logsumexp(logw[:, None] - mus[None, :] * E_unique[:, None] - lnD[:, None], axis=0)
        new = -lnZ
        return new - new[0]

    if T > 1:
        for it in range(1, 101):
            lnD = _log_denominator(f, mus, logN, E_unique)
            # p[n, s]: probability that unique energy n came from state s.
            lp = logN[None, :] + f[None, :] - mus[None, :] * E_unique[:, None] - lnD[:, None]
            p = np.exp(lp)
            grad = (weights[:, None] * p).sum(axis=0) - counts
            H = np.diag((weights[:, None] * p).sum(axis=0)) - (p * weights[:, None]).T @ p
            try:
                step = np.linalg.solve(H[1:, 1:], -grad[1:])
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            obj = float(weights @ lnD - counts @ f)
            t = 1.0
            while t > 1e-8:
                trial = f.copy()
                trial[1:] += t * step
                lnD_t = _log_denominator(trial, mus, logN, E_unique)
                if float(weights @ lnD_t - counts @ trial) <= obj + 1e-12 * abs(obj):
                    break
                t *= 0.5
            f = trial
            step = t * step
            if np.max(np.abs(step)) < 1e-13 * (1.0 + np.max(np.abs(f))):
                break
    residual = np.inf
    for k in range(max_iter):
        new = sc_update(f)
        residual = float(np.max(np.abs(new - f) / (1.0 + np.abs(f))))
        f = new
        if residual <= tol:
            return f, it + k + 1, residual
    raise ConvergenceError(f"WHAM did not reach tol={tol:g}", best=f, trace=[residual])


def multi_histogram_phi0(run: McRun, ladder: TemperatureLadder | None = None, inst_params=None,
                         mu_grid=None, *, tol=1e-10) -> WhamResult:
    """Reweight all temperatures of ``run`` into ``phi0(mu)``, ``eps(mu)`` and ``s(mu)``.

    Samples are used unbinned (each distinct energy with its multiplicity).
    ``phi0`` is normalized by reweighting to ``mu = 0``, where the partition
    function counts ``C(N, k)`` supports:

        phi0(mu) = (1/M) [ln C(N, k) + ln Z(mu) - ln Z(0)].

    Parameters
    ----------
    run : McRun
    ladder : TemperatureLadder, optional
        Defaults to ``run.ladder``.
    inst_params : dict, optional
        ``{"M", "N", "k"}``; defaults to the run's own values.
    mu_grid : array, optional
        Evaluation points; defaults to the ladder.

    Raises
    ------
    OverlapError
        If two neighbouring temperatures share no energy range.
    """
    ladder = run.ladder if ladder is None else ladder
    p = {"M": run.M, "N": run.N, "k": run.k, **(inst_params or {})}
    M, N, k = int(p["M"]), int(p["N"]), int(p["k"])
    mus = np.asarray(ladder.mu_values, dtype=float)
    E = np.asarray(run.energies, dtype=float)
    if E.ndim != 2 or E.shape[1] != mus.size:
        raise ParameterError("run energies do not match the ladder")
    _check_overlap(E)
    counts = np.full(mus.size, E.shape[0])
    E_u, w = np.unique(E.ravel(), return_counts=True)
    f, it, res = solve_wham(E_u, w, mus, counts, tol=tol)

    grid = mus.copy() if mu_grid is None else np.atleast_1d(np.asarray(mu_grid, dtype=float))
    logN = np.log(counts.astype(float))
    lnD = _log_denominator(f, mus, logN, E_u)
    logw = np.log(w.astype(float)) - lnD
    lnZ0 = logsumexp(logw)
    la = logw[None, :] - grid[:, None] * E_u[None, :]
    lnZ = logsumexp(la, axis=1)
    meanE = np.exp(la - lnZ[:, None]) @ E_u
    phi0 = (math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1) + lnZ - lnZ0) / M
    eps = meanE / M
    return WhamResult(mu_grid=grid, phi0=phi0, epsilon=eps, entropy=phi0 + grid * eps,
                      log_z=-f, iterations=it, residual=res)
