"""Replica-symmetric equations of state for the l0 problem and its entropy curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, root
from scipy.special import expit

from ..exceptions import ConvergenceError, ParameterError, RangeError
from ..validation import check_interval, check_positive
from .quadrature import even_panel_rule

RESIDUAL_TOL = 1e-9
IDENTITY_TOL = 1e-8


@dataclass(frozen=True)
class L0OrderParams:
    """Order parameters at inverse temperature ``mu``, with the problem they solve."""

    Q: float
    chi: float
    q: float
    r_hat: float
    Q_hat: float
    chi_hat: float
    q_hat: float
    mu: float
    alpha: float
    r: float
    sigma_y2: float
    order: int = 16
    residual: float = field(default=np.nan, compare=False)

    @property
    def Delta(self) -> float:
        return self.Q - self.q

    @property
    def epsilon(self) -> float:
        """Canonical distortion ``chi_hat / (2 mu^2)``."""
        return self.chi_hat / (2.0 * self.mu**2)

    @property
    def phi0(self) -> float:
        return phi0_l0(self)

    @property
    def entropy(self) -> float:
        return self.phi0 + self.mu * self.epsilon


@dataclass(frozen=True)
class EntropyCurve:
    mu_grid: np.ndarray
    epsilon_of_mu: np.ndarray
    s_of_mu: np.ndarray
    phi0_of_mu: np.ndarray
    mu0: float
    epsilon0: float
    epsilon_naive: float
    zero_params: L0OrderParams | None = None
    ansatz: str = "replica-symmetric"


def conjugates(mu, Q, chi, q, sigma_y2):
    """``(chi_hat, Q_hat, q_hat)`` from the energy-side equations."""
    D = Q - q
    a = 1.0 + chi
    b = 1.0 + chi + mu * D
    chi_hat = mu**2 * (D / (a * b) + (sigma_y2 + q) / b**2)
    Q_hat = mu * (1.0 / b - mu * (sigma_y2 + q) / b**2)
    q_hat = mu**2 * (sigma_y2 + q) / b**2
    return chi_hat, Q_hat, q_hat


def _log_y_parts(chi_hat, Q_hat, q_hat):
    """``ln Y = lnR + u + a z^2 / 2`` with ``u = -r_hat/2``; returns ``(lnR, a)``."""
    lnR = 0.5 * math.log((chi_hat + Q_hat) / (Q_hat + q_hat))
    return lnR, q_hat / (Q_hat + q_hat)


def _site_integrals(lnR, a, u, alpha, order):
    z, w = even_panel_rule(a, lnR + u, order)
    lnY = lnR + u + 0.5 * a * z * z
    p = expit(lnY)
    z2 = z * z
    return {
        "p": np.dot(w, p) / alpha,
        "dp": np.dot(w, p * (1.0 - p)) / alpha,
        "z2p": np.dot(w, z2 * p) / alpha,
        "z2pp": np.dot(w, z2 * p * p) / alpha,
        "log1pY": np.dot(w, np.logaddexp(0.0, lnY)) / alpha,
    }


def _solve_u(lnR, a, alpha, r, order, u0, max_iter=200):
    """Newton solve of ``(1/alpha) int Dz Y/(1+Y) = r`` for ``u = -r_hat/2``."""
    u = u0
    for _ in range(max_iter):
        I = _site_integrals(lnR, a, u, alpha, order)
        f = I["p"] - r
        d = I["dp"]
        step = np.clip(f / d, -5.0, 5.0) if d > 0 else -5.0 * np.sign(f)
        u -= step
        if abs(step) < 1e-14 * (1.0 + abs(u)):
            return u, _site_integrals(lnR, a, u, alpha, order)
    raise ConvergenceError(f"rate equation for r_hat did not converge (last step {step:.3e})")


def _map(mu, alpha, r, sigma_y2, Q, chi, q, order, u0):
    """One pass of the EOS map at fixed ``chi``: returns new (Q, chi, q) and the conjugates."""
    chi_hat, Q_hat, q_hat = conjugates(mu, Q, chi, q, sigma_y2)
    if not (Q_hat + q_hat > 0 and chi_hat + Q_hat > 0):
        raise ConvergenceError("order parameters left the physical domain (1 + chi + mu*Delta <= 0)")
    lnR, a = _log_y_parts(chi_hat, Q_hat, q_hat)
    u, I = _solve_u(lnR, a, alpha, r, order, u0)
    s = Q_hat + q_hat
    chi_n = mu * r / (chi_hat + Q_hat)
    Q_n = r * (chi_hat - q_hat) / ((chi_hat + Q_hat) * s) + q_hat / s**2 * I["z2p"]
    q_n = q_hat / s**2 * I["z2pp"]
    return (Q_n, chi_n, q_n), (chi_hat, Q_hat, q_hat, -2.0 * u), I


def eos_l0_residuals(p: L0OrderParams):
    """Scaled residuals ``|lhs - rhs| / (1 + |lhs|)`` of the seven equations of state.

    Order: chi_hat, Q_hat, q_hat, r, chi, Q, q.
    """
    mu, alpha, r, s2 = p.mu, p.alpha, p.r, p.sigma_y2
    ch, Qh, qh = conjugates(mu, p.Q, p.chi, p.q, s2)
    lnR, a = _log_y_parts(p.chi_hat, p.Q_hat, p.q_hat)
    I = _site_integrals(lnR, a, -0.5 * p.r_hat, alpha, p.order)
    s = p.Q_hat + p.q_hat
    rhs = {
        "chi_hat": ch,
        "Q_hat": Qh,
        "q_hat": qh,
        "r": I["p"],
        "chi": mu * r / (p.chi_hat + p.Q_hat),
        "Q": r * (p.chi_hat - p.q_hat) / ((p.chi_hat + p.Q_hat) * s) + p.q_hat / s**2 * I["z2p"],
        "q": p.q_hat / s**2 * I["z2pp"],
    }
    lhs = {"chi_hat": p.chi_hat, "Q_hat": p.Q_hat, "q_hat": p.q_hat, "r": r,
           "chi": p.chi, "Q": p.Q, "q": p.q}
    return {k: abs(lhs[k] - rhs[k]) / (1.0 + abs(lhs[k])) for k in lhs}


def l0_identities(p: L0OrderParams):
    """Scaled residuals of the closed-form identities that hold at any solution."""
    b = 1.0 + p.chi + p.mu * p.Delta
    a = 1.0 + p.chi
    checks = {
        "chi_hat+Q_hat": (p.chi_hat + p.Q_hat, p.mu / a),
        "Q_hat+q_hat": (p.Q_hat + p.q_hat, p.mu / b),
        "chi_hat-q_hat": (p.chi_hat - p.q_hat, p.mu**2 * p.Delta / (a * b)),
        "chi": (p.chi, p.r / (1.0 - p.r)),
    }
    return {k: abs(x - y) / (1.0 + abs(y)) for k, (x, y) in checks.items()}


def phi0_l0(p: L0OrderParams) -> float:
    """Replica-symmetric cumulant-generating function at the solution ``p``."""
    mu, r, s2 = p.mu, p.r, p.sigma_y2
    b = 1.0 + p.chi + mu * p.Delta
    lnR, a = _log_y_parts(p.chi_hat, p.Q_hat, p.q_hat)
    I = _site_integrals(lnR, a, -0.5 * p.r_hat, p.alpha, p.order)
    return (0.5 * math.log((1.0 + p.chi) / b) - 0.5 * mu * (p.q + s2) / b
            + 0.5 * (p.r_hat * r + p.Q_hat * p.Q - p.chi_hat * p.chi / mu + p.q_hat * p.q)
            + I["log1pY"])


def small_mu_limit(alpha, r, sigma_y2):
    """``mu -> 0`` values of ``(Q, q, epsilon, phi0)``."""
    Q = r * sigma_y2 / (1.0 - r)
    q = alpha * r * r * sigma_y2 / (1.0 - alpha * r * r)
    x = alpha * r
    phi = -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / alpha
    return Q, q, 0.5 * (1.0 - r) * sigma_y2, phi


def _check_problem(alpha, r, sigma_y2, mu):
    alpha = check_positive(alpha, "alpha")
    r = check_interval(r, "r", 0.0, 1.0, closed_hi=False)
    if alpha * r >= 1.0:
        raise ParameterError(f"alpha * r must be < 1 (more atoms than retained terms), got {alpha * r}")
    return alpha, r, check_positive(sigma_y2, "sigma_y2"), check_positive(mu, "mu")


def _newton_solve(mu, alpha, r, s2, Q0, q0, order, u0):
    chi = r / (1.0 - r)
    state = {"u": u0}
    trace = []

    def G(v):
        try:
            (Qn, _, qn), h, _ = _map(mu, alpha, r, s2, v[0], chi, v[1], order, state["u"])
        except ConvergenceError:
            return np.array([1e3, 1e3])
        state["u"] = -0.5 * h[3]
        res = np.array([Qn - v[0], qn - v[1]])
        trace.append(float(np.max(np.abs(res))))
        return res

    sol = root(G, np.array([Q0, q0]), method="hybr", options={"xtol": 1e-14})
    return sol.x, state["u"], trace


def _damped_solve(mu, alpha, r, s2, Q0, q0, order, u0, damping=0.5, max_iter=20000):
    """Damped fixed-point iteration on (Q, chi, q); damping shrinks when the residual grows."""
    Q, chi, q = Q0, r / (1.0 - r), q0
    u = u0
    trace = []
    prev = np.inf
    for _ in range(max_iter):
        (Qn, chin, qn), h, _ = _map(mu, alpha, r, s2, Q, chi, q, order, u)
        u = -0.5 * h[3]
        res = max(abs(Qn - Q), abs(chin - chi), abs(qn - q))
        trace.append(res)
        if res > prev:
            damping = max(damping * 0.5, 1e-3)
        prev = res
        Q += damping * (Qn - Q)
        chi += damping * (chin - chi)
        q += damping * (qn - q)
        if res < 1e-13:
            break
    return np.array([Q, q]), u, trace


def _assemble(mu, alpha, r, s2, Q, q, order, u):
    chi = r / (1.0 - r)
    _, (ch, Qh, qh, rh), _ = _map(mu, alpha, r, s2, Q, chi, q, order, u)
    p = L0OrderParams(Q=Q, chi=chi, q=q, r_hat=rh, Q_hat=Qh, chi_hat=ch, q_hat=qh,
                      mu=mu, alpha=alpha, r=r, sigma_y2=s2, order=order)
    res = max(eos_l0_residuals(p).values())
    return replace(p, residual=res)


def solve_eos_l0(alpha, r, sigma_y2, mu, *, init=None, order=16, method="newton",
                 max_restarts=10, seed=0):
    """Solve the l0 equations of state at inverse temperature ``mu``.

    ``chi`` is pinned to its exact value ``r/(1-r)``; ``r_hat`` is found by a
    Newton solve of the rate equation inside every map evaluation, and
    ``(Q, q)`` by a hybrid Powell root finder (``method="newton"``) or by damped
    fixed-point iteration (``method="damped"``). Without ``init`` the solve is
    continued from small ``mu``. Failed attempts fall back to the other method
    and then to randomly perturbed starts.

    Parameters
    ----------
    alpha, r, sigma_y2, mu : float
    init : L0OrderParams, optional
        Warm start (typically the solution at a neighbouring ``mu``).
    order : int
        Gauss-Legendre points per quadrature panel.
    method : {"newton", "damped"}
    max_restarts : int
    seed : int
        Seed for the perturbed restarts.

    Raises
    ------
    ConvergenceError
        With the residual trace of the last attempt.
    """
    alpha, r, s2, mu = _check_problem(alpha, r, sigma_y2, mu)
    if method not in ("newton", "damped"):
        raise ParameterError(f"unknown method {method!r}")
    if init is None and mu > 1.0:
        init = None
        for m in np.geomspace(0.05, mu, max(2, int(8 * math.log10(mu / 0.05)) + 1))[:-1]:
            init = solve_eos_l0(alpha, r, s2, m, init=init, order=order, method=method,
                                max_restarts=max_restarts, seed=seed)
    if init is None:
        Q0, q0, _, _ = small_mu_limit(alpha, r, s2)
        u0 = 0.0
    else:
        Q0, q0, u0 = init.Q, init.q, -0.5 * init.r_hat

    rng = np.random.default_rng(seed)
    methods = [method, "damped" if method == "newton" else "newton"]
    trace = []
    best = None
    for attempt in range(max_restarts + 2):
        how = methods[min(attempt, 1)]
        if attempt >= 2:
            Q0s, q0s = Q0 * math.exp(0.2 * rng.standard_normal()), q0 * math.exp(0.2 * rng.standard_normal())
        else:
            Q0s, q0s = Q0, q0
        try:
            solver = _newton_solve if how == "newton" else _damped_solve
            (Q, q), u, tr = solver(mu, alpha, r, s2, Q0s, q0s, order, u0)
            trace.extend(tr)
            p = _assemble(mu, alpha, r, s2, Q, q, order, u)
        except ConvergenceError as exc:
            trace.extend(exc.trace)
            continue
        if best is None or p.residual < best.residual:
            best = p
        ident = max(l0_identities(p).values())
        if p.residual <= RESIDUAL_TOL and ident <= IDENTITY_TOL and p.Q >= p.q >= 0:
            return p
    raise ConvergenceError(
        f"l0 EOS did not converge at alpha={alpha}, r={r}, mu={mu}"
        + (f" (best residual {best.residual:.2e})" if best is not None else ""),
        best=best, trace=trace,
    )


def _default_grid():
    return np.geomspace(1e-2, 1e8, 161)


def entropy_curve_l0(alpha, r, sigma_y2=1.0, mu_grid=None, *, order=16, mu_tol=1e-10):
    """Parametric entropy curve ``(eps(mu), s(mu))`` and its zero crossing.

    The sweep is warm-started from point to point. ``mu0`` is bracketed on the
    grid and refined by Brent's method in ``ln(mu)`` to relative ``mu_tol``.
    With the default grid, points more than one decade past the zero are skipped.

    Raises
    ------
    RangeError
        If ``s`` does not change sign on the grid.
    """
    alpha, r, s2, _ = _check_problem(alpha, r, sigma_y2, 1.0)
    default = mu_grid is None
    grid = _default_grid() if default else np.asarray(mu_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ParameterError("mu_grid must be a strictly increasing positive vector")
    sols = []
    init = None
    stop = np.inf
    for mu in grid:
        if mu > stop:
            break
        init = solve_eos_l0(alpha, r, s2, mu, init=init, order=order)
        sols.append(init)
        if default and init.entropy < 0 and stop == np.inf:
            stop = 10.0 * mu
    mus = grid[: len(sols)]
    eps = np.array([p.epsilon for p in sols])
    phi = np.array([p.phi0 for p in sols])
    s = phi + mus * eps
    neg = np.flatnonzero((s[:-1] > 0) & (s[1:] <= 0))
    if neg.size == 0:
        raise RangeError(
            f"entropy does not cross zero on mu in [{mus[0]:.3g}, {mus[-1]:.3g}]; extend mu_max"
        )
    i = int(neg[0])
    warm = {"p": sols[i]}

    def s_at(lnmu):
        p = solve_eos_l0(alpha, r, s2, math.exp(lnmu), init=warm["p"], order=order)
        warm["last"] = p
        return p.entropy

    lnmu0 = brentq(s_at, math.log(mus[i]), math.log(mus[i + 1]), xtol=mu_tol, rtol=1e-15)
    p0 = solve_eos_l0(alpha, r, s2, math.exp(lnmu0), init=warm["p"], order=order)
    return EntropyCurve(mu_grid=mus, epsilon_of_mu=eps, s_of_mu=s, phi0_of_mu=phi,
                        mu0=p0.mu, epsilon0=p0.epsilon, epsilon_naive=0.5 * (1.0 - r) * s2,
                        zero_params=p0)


def l0_zero_point(alpha, r, sigma_y2=1.0, **kw):
    """``(mu0, epsilon0)`` where the entropy crosses zero."""
    c = entropy_curve_l0(alpha, r, sigma_y2, **kw)
    return c.mu0, c.epsilon0
