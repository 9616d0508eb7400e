"""Problem instances, distortion and least-squares refits on a fixed support."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import ParameterError, ShapeError
from .validation import as_vector, check_positive, exact_int

__all__ = [
    "ProblemInstance",
    "SupportMask",
    "SparseSolution",
    "make_rng",
    "generate_instance",
    "distortion",
    "ls_refit",
    "ls_refit_arrays",
    "refit_energy",
    "random_mask",
]


def make_rng(seed, *spawn_key):
    """Counter-based generator (Philox) keyed on ``seed`` and an optional spawn path."""
    if isinstance(seed, (bool, np.bool_)) or int(seed) != seed or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Data vector ``y`` (length M) and basis ``A`` (M x N) with their generation record.

    Arrays are stored read-only, so instances can be shared between threads.
    """

    y: np.ndarray
    A: np.ndarray
    sigma_y2: float
    alpha: float
    seed: int | None = None

    def __post_init__(self):
        y = _readonly(self.y)
        A = _readonly(self.A)
        if y.ndim != 1 or A.ndim != 2 or A.shape[0] != y.shape[0]:
            raise ShapeError(f"incompatible shapes y{y.shape}, A{A.shape}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_arrays(cls, y, A, sigma_y2=1.0):
        """Wrap user-supplied arrays; ``alpha`` is taken as M/N."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise ShapeError(f"A must be two-dimensional, got shape {A.shape}")
        return cls(y=y, A=A, sigma_y2=float(sigma_y2), alpha=A.shape[0] / A.shape[1])

    def to_record(self) -> dict:
        if self.seed is None:
            raise ParameterError("instance was not generated from a seed; nothing to record")
        return {"M": self.M, "N": self.N, "alpha": self.alpha,
                "sigma_y2": self.sigma_y2, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, record) -> "ProblemInstance":
        if isinstance(record, str):
            record = json.loads(record)
        inst = generate_instance(record["M"], record["alpha"], record["sigma_y2"], record["seed"])
        if "N" in record and int(record["N"]) != inst.N:
            raise ParameterError(f"record N={record['N']} disagrees with M/alpha={inst.N}")
        return inst


@dataclass(frozen=True, eq=False)
class SupportMask:
    """Binary selection vector over the N basis columns."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True).ravel()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def k(self) -> int:
        return int(self.bits.sum())

    @property
    def N(self) -> int:
        return self.bits.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @classmethod
    def from_indices(cls, indices, N):
        idx = np.asarray(indices, dtype=np.intp).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= N):
            raise ShapeError(f"support index out of range for N={N}")
        if np.unique(idx).size != idx.size:
            raise ParameterError("support indices must be distinct")
        bits = np.zeros(N, dtype=bool)
        bits[idx] = True
        return cls(bits)

    def __eq__(self, other):
        return isinstance(other, SupportMask) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True, eq=False)
class SparseSolution:
    """Coefficients, their support and the distortion they achieve."""

    x: np.ndarray
    support: SupportMask
    epsilon: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        x = _readonly(self.x)
        if x.shape != (self.support.N,):
            raise ShapeError(f"x has shape {x.shape}, support has N={self.support.N}")
        if np.any(x[~self.support.bits] != 0):
            raise ParameterError("x has nonzero entries outside its support")
        object.__setattr__(self, "x", x)

    def rate(self, M) -> float:
        """``||x||_0 / M``."""
        return self.support.k / M


def generate_instance(M, alpha, sigma_y2, seed) -> ProblemInstance:
    """Draw ``y ~ N(0, sigma_y2)`` and ``A ~ N(0, 1/M)`` from a Philox stream.

    ``y`` is drawn before ``A`` so that the data vector of a given seed does not
    depend on ``alpha``.

    Parameters
    ----------
    M : int
        Data dimension.
    alpha : float
        M/N. Values above 1 (undercomplete bases) are accepted so that the
        naive method with ``N = rM`` can be expressed.
    sigma_y2 : float
        Variance of the entries of ``y``.
    seed : int
        Non-negative seed.
    """
    M = exact_int(M, "M")
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    alpha = check_positive(alpha, "alpha")
    sigma_y2 = check_positive(sigma_y2, "sigma_y2")
    N = exact_int(M / alpha, f"N = M/alpha (M={M}, alpha={alpha})")
    rng = make_rng(seed)
    y = rng.standard_normal(M) * np.sqrt(sigma_y2)
    A = rng.standard_normal((M, N)) / np.sqrt(M)
    return ProblemInstance(y=y, A=A, sigma_y2=sigma_y2, alpha=alpha, seed=int(seed))


def distortion(inst: ProblemInstance, x) -> float:
    """Mean squared representation error ``||y - A x||^2 / (2M)``."""
    x = as_vector(x, "x", inst.N)
    res = inst.y - inst.A @ x
    return float(res @ res) / (2 * inst.M)


def ls_refit_arrays(A, y, idx):
    """Least-squares coefficients of ``y`` on the columns ``A[:, idx]``.

    Cholesky on the normal matrix when it is well conditioned, otherwise the
    minimum-norm ``lstsq`` solution.
    """
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        return np.zeros(0)
    As = A[:, idx]
    if idx.size <= A.shape[0]:
        G = As.T @ As
        try:
            cf = linalg.cho_factor(G, check_finite=False)
            diag = np.abs(np.diag(cf[0]))
            if diag.min() > 1e-7 * diag.max():
                return linalg.cho_solve(cf, As.T @ y, check_finite=False)
        except linalg.LinAlgError:
            pass
    return linalg.lstsq(As, y, cond=1e-12, check_finite=False)[0]


def ls_refit(inst: ProblemInstance, mask: SupportMask) -> SparseSolution:
    """Minimum-distortion coefficients restricted to ``mask``."""
    if mask.N != inst.N:
        raise ShapeError(f"mask has N={mask.N}, instance has N={inst.N}")
    idx = mask.indices
    x = np.zeros(inst.N)
    x[idx] = ls_refit_arrays(inst.A, inst.y, idx)
    return SparseSolution(x=x, support=mask, epsilon=distortion(inst, x))


def refit_energy(gram, Aty, yy, idx) -> float:
    """Energy ``E = M * eps`` of the LS refit on ``idx`` from Gram quantities.

    Only the residual matters here, so linearly dependent columns can be
    dropped without changing the result; pivots below ``1e-12 * trace`` are skipped.
    """
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        return 0.5 * yy
    G = gram[np.ix_(idx, idx)]
    b = Aty[idx]
    try:
        L = linalg.cholesky(G, lower=True, check_finite=False)
        if np.abs(np.diag(L)).min() ** 2 > 1e-12 * np.trace(G):
            z = linalg.solve_triangular(L, b, lower=True, check_finite=False)
            return 0.5 * max(yy - float(z @ z), 0.0)
    except linalg.LinAlgError:
        pass
    x = linalg.lstsq(G, b, cond=1e-12, check_finite=False)[0]
    return 0.5 * max(yy - float(b @ x), 0.0)


def random_mask(N, k, rng) -> SupportMask:
    return SupportMask.from_indices(np.sort(rng.choice(N, size=k, replace=False)), N)
