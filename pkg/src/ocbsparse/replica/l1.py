"""Replica-symmetric equations of state for the LASSO and for LASSO followed by an LS refit.

Everything is evaluated at vanishing rate penalty, where both thresholds
coincide and the site integrals reduce to ``erfc(theta)`` and
``G = 2 exp(-theta^2) / sqrt(pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, erfcinv, erfcx

from ..exceptions import BranchError, ConvergenceError, ParameterError, RangeError
from ..validation import check_positive

RESIDUAL_TOL = 1e-9
_SQRT_PI = math.sqrt(math.pi)
_SERIES_FROM = 6.0


def _g_scaled_series(theta):
    """``exp(theta^2) * g(theta)`` from the asymptotic expansion of erfcx.

    With ``x = 1/(2 theta^2)`` and ``c_n = (-1)^n (2n-1)!!``,
    ``exp(theta^2) g = (1/(theta sqrt(pi))) sum_{m>=1} (c_m + c_{m+1}) x^m``.
    The sum is truncated at its smallest term.
    """
    x = 1.0 / (2.0 * theta * theta)
    c_m = -1.0
    total = 0.0
    prev = np.inf
    xm = x
    for m in range(1, 200):
        c_next = -c_m * (2 * m + 1)
        term = (c_m + c_next) * xm
        if abs(term) >= prev:
            break
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
        prev = abs(term)
        c_m = c_next
        xm *= x
    return total / (theta * _SQRT_PI)


def g_scaled(theta):
    """``exp(theta^2) * [(1 + 2 theta^2) erfc(theta) - theta G(theta)]`` for ``theta > 0``."""
    theta = float(theta)
    if theta >= _SERIES_FROM:
        return _g_scaled_series(theta)
    return (1.0 + 2.0 * theta * theta) * erfcx(theta) - 2.0 * theta / _SQRT_PI


def site_terms(theta):
    """``(erfc(theta), G(theta), g(theta))`` with ``g = (1 + 2 theta^2) erfc - theta G``."""
    theta = float(theta)
    damp = math.exp(-theta * theta)
    return float(erfc(theta)), 2.0 * damp / _SQRT_PI, g_scaled(theta) * damp


@dataclass(frozen=True)
class L1OrderParams:
    P: float
    chi_p: float
    P_hat: float
    chi_p_hat: float
    lam: float
    theta: float
    alpha: float
    sigma_y2: float
    residual: float = field(default=np.nan, compare=False)

    @property
    def r(self) -> float:
        return float(erfc(self.theta)) / self.alpha

    @property
    def epsilon(self) -> float:
        return 0.5 * self.chi_p_hat


@dataclass(frozen=True)
class L1LsOrderParams:
    C: float
    chi_c: float
    Q: float
    chi_q: float
    C_hat: float
    chi_c_hat: float
    Q_hat: float
    chi_q_hat: float
    base: L1OrderParams
    residual: float = field(default=np.nan, compare=False)

    @property
    def epsilon(self) -> float:
        return 0.5 * self.chi_q_hat


def _chi_p_hat_of_theta(theta, alpha, s2):
    E, _, g = site_terms(theta)
    r = E / alpha
    denom = 1.0 - g / alpha
    if not (r < 1.0 and denom > 0.0):
        return np.nan, r
    return s2 * (1.0 - r) ** 2 / denom, r


def _lambda_of_theta(theta, alpha, s2):
    chph, _ = _chi_p_hat_of_theta(theta, alpha, s2)
    return theta * math.sqrt(2.0 * chph) if np.isfinite(chph) else np.nan


def _params_from_theta(theta, alpha, s2, lam=None):
    chph, r = _chi_p_hat_of_theta(theta, alpha, s2)
    if not np.isfinite(chph):
        raise RangeError(f"no l1 solution at theta={theta:.6g}, alpha={alpha}")
    chi_p = r / (1.0 - r)
    P_hat = 1.0 / (1.0 + chi_p)
    P = chph / P_hat**2 - s2
    lam = theta * math.sqrt(2.0 * chph) if lam is None else lam
    p = L1OrderParams(P=P, chi_p=chi_p, P_hat=P_hat, chi_p_hat=chph, lam=lam, theta=theta,
                      alpha=alpha, sigma_y2=s2)
    res = max(eos_l1_residuals(p).values())
    return L1OrderParams(**{**p.__dict__, "residual": res})


def eos_l1_residuals(p: L1OrderParams):
    """Scaled residuals of the four equations of state at zero rate penalty.

    ``theta`` is recomputed from ``lam`` and ``chi_p_hat``.
    """
    theta = p.lam / math.sqrt(2.0 * p.chi_p_hat)
    E, _, g = site_terms(theta)
    rhs = {
        "chi_p_hat": (p.P + p.sigma_y2) / (1.0 + p.chi_p) ** 2,
        "P_hat": 1.0 / (1.0 + p.chi_p),
        "chi_p": E / (p.alpha * p.P_hat),
        "P": p.chi_p_hat / (p.alpha * p.P_hat**2) * g,
    }
    lhs = {"chi_p_hat": p.chi_p_hat, "P_hat": p.P_hat, "chi_p": p.chi_p, "P": p.P}
    return {k: abs(lhs[k] - rhs[k]) / (1.0 + abs(lhs[k])) for k in lhs}


def l1_identities(p: L1OrderParams):
    """Rate identity for ``chi_p``, and the free-energy form of the distortion versus ``chi_p_hat / 2``."""
    E, G, _ = site_terms(p.theta)
    th = p.theta
    r = E / p.alpha
    eps_long = (0.5 * (p.P + p.sigma_y2) / (1.0 + p.chi_p) - 0.5 * (p.P_hat * p.P - p.chi_p_hat * p.chi_p)
                - p.chi_p_hat / (2.0 * p.alpha * p.P_hat) * ((1.0 - 2.0 * th * th) * E + th * G))
    return {
        "chi_p": abs(p.chi_p - r / (1.0 - r)) / (1.0 + p.chi_p),
        "epsilon": abs(eps_long - 0.5 * p.chi_p_hat) / (1.0 + 0.5 * p.chi_p_hat),
    }


def _theta_bounds(alpha):
    """Smallest admissible ``theta``: ``erfc(theta) < alpha`` and ``g(theta) < alpha``."""
    lo = float(erfcinv(min(alpha, 1.999999))) if alpha < 2 else 0.0
    lo = max(lo, 1e-12)
    if site_terms(lo)[2] >= alpha:
        lo = brentq(lambda t: site_terms(t)[2] - alpha, lo, 40.0, xtol=1e-15)
    return lo


def solve_eos_l1(alpha, lam, sigma_y2=1.0):
    """Solve the LASSO equations of state for a given ``lam``.

    Given ``theta = lam / sqrt(2 chi_p_hat)`` the equations are explicit, so the
    system reduces to the scalar equation ``lam(theta) = lam``. The root on
    the branch connected to ``theta -> inf`` (empty support) is taken.

    Returns
    -------
    params : L1OrderParams
    r : float
        Compression rate ``erfc(theta) / alpha``.
    epsilon1 : float
        ``chi_p_hat / 2``.
    """
    alpha = check_positive(alpha, "alpha")
    lam = check_positive(lam, "lambda")
    s2 = check_positive(sigma_y2, "sigma_y2")
    lo = _theta_bounds(alpha)
    top = lam / math.sqrt(2.0 * s2) + 6.0
    while not _lambda_of_theta(top, alpha, s2) > lam:
        top *= 2.0
        if top > 1e8:
            raise ConvergenceError(f"could not bracket theta for lambda={lam}")
    grid = lo + (top - lo) * np.linspace(1.0, 0.0, 4001)[:-1] ** 2
    vals = np.array([_lambda_of_theta(t, alpha, s2) for t in grid])
    below = np.flatnonzero(~(vals > lam))
    if below.size == 0:
        raise RangeError(f"lambda={lam} is below every lambda reachable on the connected branch")
    i = int(below[0])
    if np.any(np.diff(vals[:i]) > 0) or not np.isfinite(vals[i]):
        raise RangeError(
            f"lambda={lam} is not reached on the branch connected to empty support at alpha={alpha}"
        )
    theta = brentq(lambda t: _lambda_of_theta(t, alpha, s2) - lam, grid[i], grid[i - 1],
                   xtol=1e-15, rtol=1e-15, maxiter=500)
    p = _params_from_theta(theta, alpha, s2, lam)
    if p.residual > RESIDUAL_TOL:
        raise ConvergenceError(f"l1 EOS residual {p.residual:.2e} at lambda={lam}", best=p,
                               trace=[p.residual])
    return p, p.r, p.epsilon


def l1_from_rate(alpha, r, sigma_y2=1.0) -> L1OrderParams:
    """LASSO order parameters for a prescribed rate; ``lam`` follows in closed form."""
    alpha = check_positive(alpha, "alpha")
    s2 = check_positive(sigma_y2, "sigma_y2")
    if not (0.0 < r < 1.0) or alpha * r >= 1.0:
        raise ParameterError(f"r must lie in (0, min(1, 1/alpha)), got {r!r}")
    theta = float(erfcinv(alpha * r))
    return _params_from_theta(theta, alpha, s2)


def _ls_equations(v, base: L1OrderParams):
    """Right-hand sides of the eight LS-refit equations at ``v``.

    ``v = (C, chi_c, Q, chi_q, C_hat, chi_c_hat, Q_hat, chi_q_hat)``.
    """
    C, chi_c, Q, chi_q, C_hat, chi_c_hat, Q_hat, chi_q_hat = v
    s2, al, th = base.sigma_y2, base.alpha, base.theta
    P, chi_p, P_hat, chph = base.P, base.chi_p, base.P_hat, base.chi_p_hat
    E, G, _ = site_terms(th)
    k = chi_c / (1.0 + chi_p)
    d = 1.0 + chi_q
    vc = chi_c_hat / chph
    uc = C_hat / P_hat
    return np.array([
        (P + s2) / d**2 * k**2 - 2.0 * (C + s2) / d**2 * k + (Q + s2) / d**2,
        1.0 / d,
        -(P + s2) / d * chi_c / (1.0 + chi_p) ** 2 + (C + s2) / d / (1.0 + chi_p),
        -k / d,
        E / (al * Q_hat),
        chph / (al * Q_hat**2) * ((chi_q_hat / chph - 2.0 * vc * uc + (1.0 + 2.0 * th * th) * uc**2) * E
                                  + th * (vc**2 - uc**2) * G),
        (-uc * E + th * vc * G) / (al * Q_hat),
        -chph / (al * Q_hat) * ((-vc / P_hat + (1.0 + 2.0 * th * th) * C_hat / P_hat**2) * E
                                - th * C_hat / P_hat**2 * G),
    ])


_LS_ORDER = ("chi_q_hat", "Q_hat", "chi_c_hat", "C_hat", "chi_q", "Q", "chi_c", "C")
_LS_INDEX = {"C": 0, "chi_c": 1, "Q": 2, "chi_q": 3, "C_hat": 4, "chi_c_hat": 5, "Q_hat": 6, "chi_q_hat": 7}


def eos_l1ls_residuals(p: L1LsOrderParams):
    """Scaled residuals of the eight LS-refit equations, keyed by their left-hand side."""
    v = np.array([p.C, p.chi_c, p.Q, p.chi_q, p.C_hat, p.chi_c_hat, p.Q_hat, p.chi_q_hat])
    rhs = _ls_equations(v, p.base)
    return {name: abs(v[_LS_INDEX[name]] - rhs[i]) / (1.0 + abs(v[_LS_INDEX[name]]))
            for i, name in enumerate(_LS_ORDER)}


def l1ls_identities(p: L1LsOrderParams):
    b = p.base
    return {
        "chi_q=chi_p": abs(p.chi_q - b.chi_p) / (1.0 + b.chi_p),
        "Q_hat=P_hat": abs(p.Q_hat - b.P_hat) / (1.0 + b.P_hat),
        "chi_q=r/(1-r)": abs(p.chi_q - b.r / (1.0 - b.r)) / (1.0 + b.chi_p),
    }


def _fixed_point_residual(v, base):
    rhs = _ls_equations(v, base)
    out = np.empty(8)
    for i, name in enumerate(_LS_ORDER):
        out[_LS_INDEX[name]] = v[_LS_INDEX[name]] - rhs[i]
    return out


def _solve_ls_linear(base: L1OrderParams):
    """Exact solve: fix ``chi_q`` and ``Q_hat``, then two affine blocks in the rest."""
    chi_q = base.r / (1.0 - base.r)
    Q_hat = 1.0 / (1.0 + chi_q)
    v = np.zeros(8)
    v[_LS_INDEX["chi_q"]] = chi_q
    v[_LS_INDEX["Q_hat"]] = Q_hat
    for block in (("C", "chi_c", "C_hat", "chi_c_hat"), ("Q", "chi_q_hat")):
        idx = [_LS_INDEX[n] for n in block]

        def F(x, idx=idx):
            w = v.copy()
            w[idx] = x
            return _fixed_point_residual(w, base)[idx]

        # F is affine in the block variables, so its Jacobian is exact by differencing.
        f0 = F(np.zeros(len(idx)))
        J = np.column_stack([F(e) - f0 for e in np.eye(len(idx))])
        v[idx] = np.linalg.solve(J, -f0)
    return v


def _solve_ls_damped(base: L1OrderParams, damping=0.5, tol=1e-14, max_iter=100_000):
    """Damped Jacobi iteration of the eight equations, started from the LASSO order parameters."""
    v = np.array([base.P, base.chi_p, base.P, base.chi_p, -base.P_hat, base.chi_p_hat,
                  base.P_hat, base.chi_p_hat])
    trace = []
    for _ in range(max_iter):
        step = -_fixed_point_residual(v, base)
        res = float(np.max(np.abs(step)))
        trace.append(res)
        if not np.isfinite(res) or res > 1e12:
            raise ConvergenceError("LS-refit iteration diverged", best=v, trace=trace)
        v = v + damping * step
        if res < tol:
            return v, trace
    raise ConvergenceError("LS-refit iteration did not converge", best=v, trace=trace)


def solve_eos_l1ls(alpha, lam, sigma_y2=1.0, *, base: L1OrderParams | None = None, method="linear"):
    """Distortion after an LS refit of the LASSO support.

    The LASSO order parameters are solved first and held fixed. With them
    fixed the eight remaining equations are affine in the unknowns once
    ``chi_q`` and ``Q_hat`` are set, so ``method="linear"`` solves them exactly
    and the solution is unique. ``method="damped"`` iterates the equations
    from the no-refit point instead and serves as a cross-check.

    Returns
    -------
    params : L1LsOrderParams
    epsilon1_ls : float
    """
    if base is None:
        base, _, _ = solve_eos_l1(alpha, lam, sigma_y2)
    if method == "linear":
        v = _solve_ls_linear(base)
        trace = []
    elif method == "damped":
        v, trace = _solve_ls_damped(base)
    else:
        raise ParameterError(f"unknown method {method!r}")
    p = L1LsOrderParams(*v, base=base)
    res = max(eos_l1ls_residuals(p).values())
    if not res <= RESIDUAL_TOL:
        raise ConvergenceError(f"LS-refit EOS residual {res:.2e}", best=p, trace=trace + [res])
    p = L1LsOrderParams(*v, base=base, residual=res)
    return p, p.epsilon


def l1ls_from_rate(alpha, r, sigma_y2=1.0):
    base = l1_from_rate(alpha, r, sigma_y2)
    return solve_eos_l1ls(alpha, base.lam, sigma_y2, base=base)


def sweep_l1(alpha, lambdas, sigma_y2=1.0, *, jump_tol=0.05):
    """``(lam, r, epsilon1, epsilon1_ls)`` rows along a monotone ``lambdas`` sweep.

    Raises
    ------
    BranchError
        If a point departs from the quadratic extrapolation of the previous
        three by more than ``jump_tol`` relative, which signals a jump between
        solution branches.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ParameterError("lambdas must be a non-empty vector")
    if lambdas.size > 1 and not (np.all(np.diff(lambdas) > 0) or np.all(np.diff(lambdas) < 0)):
        raise ParameterError("lambdas must be strictly monotone")
    rows = []
    for lam in lambdas:
        base, r, e1 = solve_eos_l1(alpha, lam, sigma_y2)
        _, els = solve_eos_l1ls(alpha, lam, sigma_y2, base=base)
        rows.append((lam, r, e1, els))
        if len(rows) >= 4:
            x = np.array([row[0] for row in rows[-4:]])
            for col in (2, 3):
                y = np.array([row[col] for row in rows[-4:]])
                pred = np.polyval(np.polyfit(x[:3], y[:3], 2), x[3])
                if abs(pred - y[3]) > jump_tol * abs(y[3]):
                    raise BranchError(f"discontinuity at lambda={lam:.6g} (column {col})")
    return np.array(rows)
