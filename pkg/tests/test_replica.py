import math

import mpmath as mp
import numpy as np
import pytest
from scipy.special import erfc

from ocbsparse import InputError, ParameterError, PlateauError, RangeError
from ocbsparse.exceptions import BranchError
from ocbsparse.replica import (
    asymptotics_alpha_to_zero,
    entropy_curve_l0,
    eos_l0_residuals,
    even_panel_rule,
    g_scaled,
    gauss_measure_integral,
    hermite_rule,
    l0_identities,
    l1_from_rate,
    l1ls_from_rate,
    phi0_l0,
    required_basis_size,
    site_terms,
    small_mu_limit,
    solve_eos_l0,
    solve_eos_l1,
    solve_eos_l1ls,
    sweep_l1,
)

# ---------------------------------------------------------------- quadrature


def test_gauss_measure_moments():
    assert gauss_measure_integral(lambda z: np.ones_like(z)) == pytest.approx(1.0, abs=1e-14)
    assert gauss_measure_integral(lambda z: z ** 2) == pytest.approx(1.0, abs=1e-13)


def test_gauss_measure_logistic():
    assert gauss_measure_integral(lambda z: 1 / (1 + np.exp(-z))) == pytest.approx(0.5, abs=1e-14)


def test_gauss_measure_against_mpmath():
    f = lambda z: np.cos(z) ** 2  # noqa: E731
    ref = mp.quad(lambda z: mp.cos(z) ** 2 * mp.exp(-z ** 2 / 2) / mp.sqrt(2 * mp.pi), [-mp.inf, mp.inf])
    assert gauss_measure_integral(f) == pytest.approx(float(ref), abs=1e-13)


def test_gauss_measure_order_floor():
    with pytest.raises(ParameterError):
        gauss_measure_integral(lambda z: z, order=16)


def test_hermite_rule_normalized():
    z, w = hermite_rule(96)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)


def test_even_panel_rule_integrates_steep_logistic():
    # 2 int_0^inf phi(z) / (1 + exp(a z^2 / 2 + c)) against mpmath at a sharp step.
    a, c = 40.0, -30.0
    z, w = even_panel_rule(a, c)
    ours = float(np.sum(w * np.exp(-np.logaddexp(0.0, a * z ** 2 / 2 + c))))
    ref = mp.quad(lambda t: 2 * mp.exp(-t ** 2 / 2) / mp.sqrt(2 * mp.pi) / (1 + mp.exp(a * t ** 2 / 2 + c)),
                  [0, mp.sqrt(-2 * c / a), 14])
    assert ours == pytest.approx(float(ref), rel=1e-12)


# ---------------------------------------------------------------- l0

def test_chi_fixed_at_half_rate():
    p = solve_eos_l0(0.5, 0.5, 1.0, 5.0)
    assert p.chi == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha,r,mu", [(0.5, 0.2, 0.3), (0.5, 0.4, 20.0), (0.3, 0.5, 2.0), (0.8, 0.3, 100.0)])
def test_l0_residuals_and_identities(alpha, r, mu):
    p = solve_eos_l0(alpha, r, 1.0, mu)
    assert max(abs(v) for v in eos_l0_residuals(p).values()) <= 1e-9
    assert max(abs(v) for v in l0_identities(p).values()) <= 1e-8
    assert p.Q >= p.q >= 0


def test_l0_epsilon_is_minus_phi0_derivative():
    mu, h = 3.0, 1e-4
    p = solve_eos_l0(0.5, 0.3, 1.0, mu)
    up = phi0_l0(solve_eos_l0(0.5, 0.3, 1.0, mu + h, init=p))
    dn = phi0_l0(solve_eos_l0(0.5, 0.3, 1.0, mu - h, init=p))
    assert -(up - dn) / (2 * h) == pytest.approx(p.epsilon, abs=1e-5)


def test_l0_summit_limit():
    p = solve_eos_l0(0.5, 0.3, 2.0, 1e-7)
    assert p.epsilon == pytest.approx(0.7 * 2.0 / 2, abs=1e-6)


def test_small_mu_limit_matches_solver():
    Q, q, eps, phi = small_mu_limit(0.5, 0.4, 1.0)
    p = solve_eos_l0(0.5, 0.4, 1.0, 1e-6)
    assert p.Q == pytest.approx(Q, rel=1e-5)
    assert p.q == pytest.approx(q, rel=1e-4)
    assert p.epsilon == pytest.approx(eps, rel=1e-5)
    assert p.phi0 == pytest.approx(phi, rel=1e-5)


def test_l0_damped_route_agrees():
    a = solve_eos_l0(0.5, 0.4, 1.0, 10.0)
    b = solve_eos_l0(0.5, 0.4, 1.0, 10.0, method="damped")
    assert b.epsilon == pytest.approx(a.epsilon, rel=1e-9)


def test_l0_panel_order_convergence():
    a = solve_eos_l0(0.5, 0.4, 1.0, 30.0, order=16)
    b = solve_eos_l0(0.5, 0.4, 1.0, 30.0, order=32)
    assert abs(a.epsilon - b.epsilon) < 1e-8
    assert abs(a.phi0 - b.phi0) < 1e-8


def test_l0_rejects_bad_rate():
    with pytest.raises(ParameterError):
        solve_eos_l0(0.5, 1.2, 1.0, 1.0)


def test_entropy_curve_properties():
    c = entropy_curve_l0(0.5, 0.4)
    s = np.asarray(c.s_of_mu)
    eps = np.asarray(c.epsilon_of_mu)
    assert np.all(np.diff(eps) < 0)
    assert np.all(np.diff(s) < 0)
    p0 = solve_eos_l0(0.5, 0.4, 1.0, c.mu0)
    assert abs(p0.entropy) < 1e-9
    assert c.epsilon_naive == pytest.approx(0.3)


def test_entropy_summit_is_binary_entropy():
    c = entropy_curve_l0(0.5, 0.2)
    rho = 0.5 * 0.2
    hb = -(rho * math.log(rho) + (1 - rho) * math.log(1 - rho))
    assert c.s_of_mu[0] == pytest.approx(hb / 0.5, abs=2e-3)


def test_epsilon0_decreases_with_alpha():
    e = [entropy_curve_l0(a, 0.3).epsilon0 for a in (0.8, 0.5, 0.3)]
    assert e[0] > e[1] > e[2]


def test_entropy_curve_needs_sign_change():
    with pytest.raises(RangeError, match="mu_max"):
        entropy_curve_l0(0.5, 0.4, mu_grid=np.geomspace(0.1, 1.0, 10))


# ---------------------------------------------------------------- l1

def test_g_scaled_series_against_mpmath():
    # The unscaled expression cancels to ~theta^-4 of its terms; work at 60 digits.
    for theta in (6.0, 8.5, 15.0, 40.0):
        with mp.workdps(60):
            t = mp.mpf(theta)
            ref = mp.e ** (t ** 2) * ((1 + 2 * t ** 2) * mp.erfc(t) - t * 2 / mp.sqrt(mp.pi) * mp.e ** (-t ** 2))
        assert float(g_scaled(theta)) == pytest.approx(float(ref), rel=1e-12)


def test_site_terms_direct_branch():
    E, G, g = site_terms(1.3)
    assert E == pytest.approx(erfc(1.3))
    assert g == pytest.approx((1 + 2 * 1.3 ** 2) * E - 1.3 * G)


def test_l1_rate_and_identities():
    p, r, e1 = solve_eos_l1(0.5, 1.0, 1.0)
    assert r == pytest.approx(erfc(p.theta) / 0.5, rel=1e-12)
    assert p.chi_p == pytest.approx(r / (1 - r), rel=1e-10)
    assert p.P_hat == pytest.approx(1 / (1 + p.chi_p), rel=1e-12)
    assert e1 == pytest.approx(p.chi_p_hat / 2)


def test_l1_large_lambda_limit():
    _, r, e1 = solve_eos_l1(0.5, 20.0, 1.0)
    assert r < 1e-6 and e1 == pytest.approx(0.5, rel=1e-5)


def test_l1_from_rate_inverse():
    p = l1_from_rate(0.5, 0.5, 1.0)
    assert p.r == pytest.approx(0.5, abs=1e-12)
    assert p.lam == pytest.approx(0.649, abs=2e-3)


def test_l1ls_identities_and_dominance():
    for lam in (0.65, 1.0, 2.0):
        base, r, e1 = solve_eos_l1(0.5, lam)
        q, els = solve_eos_l1ls(0.5, lam, base=base)
        assert q.chi_q == pytest.approx(base.chi_p, rel=1e-10)
        assert q.Q_hat == pytest.approx(base.P_hat, rel=1e-10)
        assert els <= e1
        assert els <= (1 - r) / 2


def test_l1ls_damped_route_agrees():
    _, a = solve_eos_l1ls(0.5, 1.0)
    _, b = solve_eos_l1ls(0.5, 1.0, method="damped")
    assert b == pytest.approx(a, rel=1e-10)


def test_dominance_at_equal_rate():
    for r in (0.2, 0.4, 0.5):
        e0 = entropy_curve_l0(0.5, r).epsilon0
        els = l1ls_from_rate(0.5, r)[1]
        e1 = l1_from_rate(0.5, r).epsilon
        assert e0 <= els <= e1
        assert els <= (1 - r) / 2


def test_sweep_l1_continuous():
    rows = sweep_l1(0.5, np.linspace(0.5, 3.0, 26))
    r = np.array([row[1] for row in rows])
    assert np.all(np.diff(r) < 0)


def test_sweep_l1_flags_jumps():
    with pytest.raises(BranchError):
        sweep_l1(0.5, [0.5, 0.6, 0.7, 3.0], jump_tol=1e-3)


# ---------------------------------------------------------------- asymptotics

def test_asymptotics_slope_r02():
    rep = asymptotics_alpha_to_zero(0.2, include=("l0",))
    assert rep.eps0_slope_theory == pytest.approx(0.5)
    assert abs(rep.eps0_slope - 0.5) <= 0.05 * 0.5


def test_asymptotics_empty_grid():
    with pytest.raises(InputError):
        asymptotics_alpha_to_zero(0.2, alphas=[])


def test_asymptotics_range_check():
    with pytest.raises(ParameterError):
        asymptotics_alpha_to_zero(0.2, alphas=[0.5, 0.1])


def test_eps1ls_lnalpha_stable():
    rep = asymptotics_alpha_to_zero(0.5, include=("l1ls",))
    ratios = np.asarray(rep.eps1ls_decade_ratios)
    ratios = ratios[np.isfinite(ratios)]
    assert np.all(np.abs(ratios - 1) <= 0.10)


def test_required_basis_size_l0():
    a = required_basis_size(0.1, 100, 0.5, "l0")
    b = required_basis_size(0.05, 100, 0.5, "l0")
    assert b.n_required / a.n_required == pytest.approx(2 ** 0.5)
    assert a.up_to_constant


def test_required_basis_size_l1ls():
    a = required_basis_size(1.0, 10, 0.5, "l1ls")
    b = required_basis_size(0.5, 10, 0.5, "l1ls")
    assert b.n_required / a.n_required == pytest.approx(math.e)


def test_required_basis_size_explodes_at_small_rate():
    assert required_basis_size(0.1, 10, 0.05, "l0").n_required > 1e9


def test_required_basis_size_l1_plateau():
    with pytest.raises(PlateauError):
        required_basis_size(0.1, 10, 0.5, "l1")
