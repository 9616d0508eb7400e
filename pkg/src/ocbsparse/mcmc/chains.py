"""Exchange Monte Carlo over supports of fixed size."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..core import ProblemInstance, SupportMask, ls_refit, make_rng
from ..exceptions import ParameterError, ShapeError
from ..validation import rate_to_count

_CHUNK = 1024

# (M values, steps) per rate; a run at other sizes takes the entry of the next
# listed size up, clamped to the table ends.
STEP_TABLE = {
    0.2: ((30, 35, 40, 45, 50), (20_000, 30_000, 40_000, 70_000, 100_000)),
    0.4: ((20, 25, 30, 35, 40), (20_000, 40_000, 80_000, 150_000, 300_000)),
}
LADDER_RANGE = {0.2: (1.0, 10.0), 0.4: (1.0, 35.0)}


def default_steps(M, r) -> int:
    """MC steps for size ``M`` at rate ``r`` from the step table of the nearest listed rate."""
    key = min(STEP_TABLE, key=lambda k: abs(k - r))
    Ms, steps = STEP_TABLE[key]
    i = min(bisect.bisect_left(Ms, M), len(Ms) - 1)
    return steps[i]


@dataclass(frozen=True)
class TemperatureLadder:
    mu_values: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu_values, dtype=float, copy=True).ravel()
        if mu.size == 0 or np.any(mu <= 0) or np.any(np.diff(mu) <= 0):
            raise ParameterError("ladder must be a non-empty, strictly increasing positive vector")
        mu.setflags(write=False)
        object.__setattr__(self, "mu_values", mu)

    @classmethod
    def geometric(cls, mu_min, mu_max, T=15):
        if T == 1:
            return cls(np.array([float(mu_min)]))
        return cls(np.geomspace(mu_min, mu_max, T))

    @classmethod
    def default(cls, r, T=15):
        lo, hi = LADDER_RANGE.get(round(r, 12), (1.0, 35.0))
        return cls.geometric(lo, hi, T)

    @property
    def T(self) -> int:
        return self.mu_values.size


@dataclass(frozen=True)
class McRun:
    """Post-burn-in energies ``E = M * eps`` with shape ``(steps - burn_in, T)``."""

    energies: np.ndarray
    swap_acceptance: np.ndarray
    flip_acceptance: np.ndarray
    steps: int
    burn_in: int
    ladder: TemperatureLadder
    seed: int
    M: int
    N: int
    k: int
    masks: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self) -> str:
        lines = ["step,temperature_index,energy"]
        S, T = self.energies.shape
        for s in range(S):
            step = self.burn_in + s + 1
            for t in range(T):
                lines.append(f"{step},{t},{self.energies[s, t]:.12g}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "ladder": [float(m) for m in self.ladder.mu_values],
            "swap_acceptance": [float(a) for a in self.swap_acceptance],
            "flip_acceptance": [float(a) for a in self.flip_acceptance],
            "steps": self.steps, "burn_in": self.burn_in, "seed": self.seed,
            "M": self.M, "N": self.N, "k": self.k,
        }

    def save(self, csv_path, json_path):
        with open(csv_path, "w") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@njit(cache=True)
def _energy(gram, Aty, yy, idx, L, z):
    """Refit energy of the columns ``idx``; dependent columns are skipped."""
    k = idx.shape[0]
    acc = 0.0
    for i in range(k):
        gi = idx[i]
        for j in range(i + 1):
            s = gram[gi, idx[j]]
            for m in range(j):
                s -= L[i, m] * L[j, m]
            if i == j:
                if s > 1e-12 * gram[gi, gi]:
                    L[i, i] = math.sqrt(s)
                else:
                    L[i, i] = 0.0
            else:
                L[i, j] = s / L[j, j] if L[j, j] > 0.0 else 0.0
        if L[i, i] > 0.0:
            s = Aty[gi]
            for m in range(i):
                s -= L[i, m] * z[m]
            z[i] = s / L[i, i]
        else:
            z[i] = 0.0
        acc += z[i] * z[i]
    e = 0.5 * (yy - acc)
    return e if e > 0.0 else 0.0


@njit(cache=True)
def _run_chunk(gram, Aty, yy, mus, ones, zeros, energies, pi, pj, pu, xu,
               out_E, out_masks, record_from, flip_acc, swap_acc):
    S, T = xu.shape[0], mus.shape[0]
    F = pi.shape[0] // S
    k = ones.shape[1]
    L = np.zeros((k, k))
    z = np.zeros(k)
    trial = np.empty(k, dtype=ones.dtype)
    for s in range(S):
        for t in range(T):
            for f in range(s * F, (s + 1) * F):
                a = pi[f, t]
                b = pj[f, t]
                for m in range(k):
                    trial[m] = ones[t, m]
                trial[a] = zeros[t, b]
                e_new = _energy(gram, Aty, yy, trial, L, z)
                dE = e_new - energies[t]
                if dE <= 0.0 or pu[f, t] < math.exp(-mus[t] * dE):
                    old = ones[t, a]
                    ones[t, a] = zeros[t, b]
                    zeros[t, b] = old
                    energies[t] = e_new
                    flip_acc[t] += 1
        for t in range(T - 1):
            x = (mus[t + 1] - mus[t]) * (energies[t + 1] - energies[t])
            if x >= 0.0 or xu[s, t] < math.exp(x):
                for m in range(k):
                    tmp = ones[t, m]
                    ones[t, m] = ones[t + 1, m]
                    ones[t + 1, m] = tmp
                for m in range(zeros.shape[1]):
                    tmp = zeros[t, m]
                    zeros[t, m] = zeros[t + 1, m]
                    zeros[t + 1, m] = tmp
                tmp_e = energies[t]
                energies[t] = energies[t + 1]
                energies[t + 1] = tmp_e
                swap_acc[t] += 1
        r = s - record_from
        if r >= 0:
            for t in range(T):
                out_E[r, t] = energies[t]
            if out_masks.shape[0] > 0:
                for t in range(T):
                    for m in range(k):
                        out_masks[r, t, m] = ones[t, m]


def run_exchange_mc(inst: ProblemInstance, r, ladder: TemperatureLadder, steps=None, seed=0,
                    *, flips=None, record_masks=False) -> McRun:
    """Exchange Monte Carlo at every ladder temperature.

    One MC step is a sweep of ``flips`` pair-flip proposals at every
    temperature (Metropolis with the LS-refit energy), then makes one exchange attempt between each pair of
    neighbouring temperatures, in increasing order. The first half of the steps
    is discarded.

    Temperature ``t`` draws from stream ``(seed, 1, t)`` and the exchange pass
    from stream ``(seed, 2)``, so results do not depend on scheduling.

    Parameters
    ----------
    inst : ProblemInstance
    r : float
        Rate; ``r * M`` must be an integer with ``0 < rM < N``.
    ladder : TemperatureLadder
    steps : int, optional
        Defaults to :func:`default_steps`.
    seed : int
    flips : int, optional
        Proposals per temperature per step; defaults to ``N``.
    record_masks : bool
        Keep the sorted support of every post-burn-in state (small problems only).
    """
    M, N = inst.M, inst.N
    k = rate_to_count(r, M)
    if not 0 < k < N:
        raise ParameterError(f"need 0 < rM < N, got rM={k}, N={N}")
    steps = default_steps(M, r) if steps is None else int(steps)
    if steps < 2:
        raise ParameterError("steps must be >= 2")
    burn = steps // 2
    F = N if flips is None else int(flips)
    if F < 1:
        raise ParameterError("flips must be >= 1")
    mus = np.ascontiguousarray(ladder.mu_values)
    T = mus.size

    gram = np.ascontiguousarray(inst.A.T @ inst.A)
    Aty = inst.A.T @ inst.y
    yy = float(inst.y @ inst.y)
    streams = [make_rng(seed, 1, t) for t in range(T)]
    xstream = make_rng(seed, 2)
    ones = np.empty((T, k), dtype=np.int64)
    zeros = np.empty((T, N - k), dtype=np.int64)
    energies = np.empty(T)
    L, z = np.zeros((k, k)), np.zeros(k)
    for t, rng in enumerate(streams):
        perm = rng.permutation(N)
        ones[t] = np.sort(perm[:k])
        zeros[t] = np.sort(perm[k:])
        energies[t] = _energy(gram, Aty, yy, ones[t], L, z)

    kept = steps - burn
    out_E = np.empty((kept, T))
    out_masks = np.empty((kept if record_masks else 0, T, k), dtype=np.int64)
    flip_acc = np.zeros(T, dtype=np.int64)
    swap_acc = np.zeros(max(T - 1, 0), dtype=np.int64)
    done = 0
    while done < steps:
        S = min(_CHUNK, steps - done)
        pi = np.empty((S * F, T), dtype=np.int64)
        pj = np.empty((S * F, T), dtype=np.int64)
        pu = np.empty((S * F, T))
        for t, rng in enumerate(streams):
            pi[:, t] = rng.integers(0, k, S * F)
            pj[:, t] = rng.integers(0, N - k, S * F)
            pu[:, t] = rng.random(S * F)
        xu = xstream.random((S, max(T - 1, 0)))
        lo = max(0, burn - done)
        oE = out_E[done + lo - burn: done + S - burn] if lo < S else out_E[:0]
        oM = (out_masks[done + lo - burn: done + S - burn] if (record_masks and lo < S)
              else out_masks[:0])
        _run_chunk(gram, Aty, yy, mus, ones, zeros, energies, pi, pj, pu, xu,
                   oE, oM, lo, flip_acc, swap_acc)
        done += S
    masks = None
    if record_masks:
        masks = np.sort(out_masks, axis=2)
    return McRun(energies=out_E, swap_acceptance=swap_acc / steps,
                 flip_acceptance=flip_acc / (steps * F),
                 steps=steps, burn_in=burn, ladder=ladder, seed=int(seed), M=M, N=N, k=k, masks=masks)


def _mask_energy(inst, mask):
    return inst.M * ls_refit(inst, mask).epsilon


def mc_pair_flip(state: SupportMask, inst: ProblemInstance, mu, rng, *, energy=None):
    """One Metropolis pair flip: move a random selected index to a random unselected one.

    Returns
    -------
    (SupportMask, float)
        New state and its energy ``E = M * eps``.
    """
    if state.N != inst.N:
        raise ShapeError("mask and instance disagree on N")
    ones, zeros = state.indices, np.flatnonzero(~state.bits)
    if ones.size == 0 or zeros.size == 0:
        raise ParameterError("pair flip needs 0 < k < N")
    e_old = _mask_energy(inst, state) if energy is None else energy
    i = ones[rng.integers(ones.size)]
    j = zeros[rng.integers(zeros.size)]
    bits = state.bits.copy()
    bits[i], bits[j] = False, True
    trial = SupportMask(bits)
    e_new = _mask_energy(inst, trial)
    dE = e_new - e_old
    if dE <= 0 or rng.random() < math.exp(-mu * dE):
        return trial, e_new
    return state, e_old


def exchange_step(states, energies, ladder: TemperatureLadder, rng):
    """One exchange pass over neighbouring temperature pairs, lowest ``mu`` first.

    Returns
    -------
    (states, energies, accepted)
        New lists and a boolean per pair.
    """
    states, energies = list(states), list(energies)
    mus = ladder.mu_values
    if len(states) != mus.size or len(energies) != mus.size:
        raise ShapeError("need one state and one energy per ladder temperature")
    accepted = np.zeros(max(mus.size - 1, 0), dtype=bool)
    for t in range(mus.size - 1):
        x = (mus[t + 1] - mus[t]) * (energies[t + 1] - energies[t])
        if x >= 0 or rng.random() < math.exp(x):
            states[t], states[t + 1] = states[t + 1], states[t]
            energies[t], energies[t + 1] = energies[t + 1], energies[t]
            accepted[t] = True
    return states, energies, accepted
