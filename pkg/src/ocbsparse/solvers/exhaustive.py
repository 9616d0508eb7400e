"""Exhaustive l0 search over all supports of a fixed size."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..core import ProblemInstance, SparseSolution, SupportMask, ls_refit, refit_energy
from ..exceptions import BudgetError
from ..validation import rate_to_count

DEFAULT_BUDGET = 10**8


@dataclass(frozen=True)
class EntropyHistogram:
    """Distortion of every support of size ``k = rM``.

    ``epsilon_values`` is sorted and ``counts`` holds the multiplicity of each
    value (ties are merged), so ``counts.sum() == C(N, k)``.
    """

    epsilon_values: np.ndarray
    counts: np.ndarray
    M: int
    N: int
    r: float

    @property
    def k(self) -> int:
        return rate_to_count(self.r, self.M)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def log_partition(self, mu):
        """``ln sum_c exp(-mu * M * eps(c))`` for each ``mu``."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        E = self.M * self.epsilon_values
        logw = np.log(self.counts.astype(float))
        out = logsumexp(logw[None, :] - mu[:, None] * E[None, :], axis=1)
        return out

    def phi0(self, mu):
        """Cumulant-generating function ``(1/M) ln Z(mu)``; ``phi0(0) = ln C(N, k) / M``."""
        return self.log_partition(mu) / self.M

    def mean_epsilon(self, mu):
        """Canonical average of the distortion at inverse temperature ``mu``."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        E = self.M * self.epsilon_values
        logw = np.log(self.counts.astype(float))[None, :] - mu[:, None] * E[None, :]
        logw -= logsumexp(logw, axis=1, keepdims=True)
        return np.exp(logw) @ self.epsilon_values

    def entropy(self, mu):
        """Parametric entropy curve ``(eps(mu), s(mu))`` with ``s = phi0 + mu * eps``."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        eps = self.mean_epsilon(mu)
        return eps, self.phi0(mu) + mu * eps


def _batch_energies(gram, Aty, yy, combos):
    """Refit energies ``0.5 * ||y - A_S x_S||^2`` for a batch of supports."""
    G = gram[combos[:, :, None], combos[:, None, :]]
    b = Aty[combos]
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return None
    z = np.linalg.solve(L, b[..., None])[..., 0]
    return 0.5 * np.maximum(yy - np.einsum("ij,ij->i", z, z), 0.0)


def exhaustive_search(inst: ProblemInstance, r, *, budget=DEFAULT_BUDGET, batch_size=32768):
    """Refit every support of size ``rM`` and return the best one plus the histogram.

    Parameters
    ----------
    inst : ProblemInstance
    r : float
        Rate; ``r * M`` must be an integer.
    budget : int
        Maximum number of supports to enumerate.
    batch_size : int
        Supports refitted per vectorized batch.

    Returns
    -------
    solution : SparseSolution
        Global minimizer (lowest lexicographic index among exact ties).
    histogram : EntropyHistogram
    """
    M, N = inst.M, inst.N
    k = rate_to_count(r, M)
    total = math.comb(N, k)
    if total > budget:
        raise BudgetError(
            f"C({N}, {k}) = {total} supports exceed the budget of {budget}; "
            "use ocbsparse.mcmc.run_exchange_mc for sizes of this order"
        )
    if k == 0:
        sol = ls_refit(inst, SupportMask(np.zeros(N, dtype=bool)))
        hist = EntropyHistogram(np.array([sol.epsilon]), np.array([1]), M, N, float(r))
        return sol, hist

    gram = inst.A.T @ inst.A
    Aty = inst.A.T @ inst.y
    yy = float(inst.y @ inst.y)
    energies = np.empty(total)
    it = itertools.combinations(range(N), k)
    pos = 0
    while pos < total:
        n = min(batch_size, total - pos)
        combos = np.fromiter(itertools.chain.from_iterable(itertools.islice(it, n)),
                             dtype=np.intp, count=n * k).reshape(n, k)
        e = _batch_energies(gram, Aty, yy, combos) if k <= M else None
        if e is None:
            e = np.array([refit_energy(gram, Aty, yy, c) for c in combos])
        energies[pos:pos + n] = e
        pos += n

    best = int(np.argmin(energies))
    best_idx = next(itertools.islice(itertools.combinations(range(N), k), best, None))
    sol = ls_refit(inst, SupportMask.from_indices(best_idx, N))
    eps = energies / M
    values, counts = np.unique(eps, return_counts=True)
    # Gram-based energies carry rounding; pin the minimum to the direct refit.
    values[0] = sol.epsilon
    hist = EntropyHistogram(values, counts, M, N, float(r))
    return sol, hist
