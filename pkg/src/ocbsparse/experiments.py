"""Ensemble simulations shared by the command-line recipes and the test-suite."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import SupportMask, generate_instance, ls_refit
from .exceptions import ConvergenceError, ParameterError
from .solvers.amp import amp
from .solvers.lasso import lasso_solve
from .solvers.omp import omp
from .validation import rate_to_count

SIM_METHODS = ("naive", "omp", "lasso", "amp")


def instance_seed(seed, *key) -> int:
    """64-bit seed for the instance labelled ``key`` under a run seed."""
    words = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def naive_instance(M, r, sigma_y2, seed):
    """Instance with ``N = rM`` columns, the basis of the naive method."""
    k = rate_to_count(r, M)
    if k < 1:
        raise ParameterError("naive method needs rM >= 1")
    return generate_instance(M, M / k, sigma_y2, seed)


def simulate_point(method, M, alpha, sigma_y2, seed, *, r=None, lam=None) -> dict:
    """One instance, one solver.

    ``naive`` and ``omp`` take the rate ``r``; ``lasso`` and ``amp`` take ``lam``
    and report the rate they produce together with the LS-refit distortion.

    Returns
    -------
    dict
        ``epsilon``, ``rate`` and, for the l1 methods, ``epsilon_ls``.
    """
    if method == "naive":
        inst = naive_instance(M, r, sigma_y2, seed)
        sol = ls_refit(inst, SupportMask(np.ones(inst.N, dtype=bool)))
        return {"epsilon": sol.epsilon, "rate": inst.N / M}
    inst = generate_instance(M, alpha, sigma_y2, seed)
    if method == "omp":
        sol = omp(inst, r)
        return {"epsilon": sol.epsilon, "rate": sol.support.k / M}
    if method in ("lasso", "amp"):
        if method == "amp":
            try:
                sol, _ = amp(inst, lam)
            except ConvergenceError:
                # Same fixed point; coordinate descent does not diverge.
                sol, _ = lasso_solve(inst, lam)
        else:
            sol, _ = lasso_solve(inst, lam)
        refit = ls_refit(inst, sol.support)
        return {"epsilon": sol.epsilon, "rate": sol.support.k / M, "epsilon_ls": refit.epsilon}
    raise ParameterError(f"method must be one of {SIM_METHODS}, got {method!r}")


def simulate_ensemble(method, M, alpha, sigma_y2, seed, instances, *, r=None, lam=None,
                      threads=1) -> dict:
    """Arrays of per-instance results, in instance order regardless of ``threads``."""
    seeds = [instance_seed(seed, M, i) for i in range(instances)]

    def one(s):
        return simulate_point(method, M, alpha, sigma_y2, s, r=r, lam=lam)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, seeds))
    else:
        rows = [one(s) for s in seeds]
    return {key: np.array([row[key] for row in rows]) for key in rows[0]}
