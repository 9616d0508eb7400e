import math
from itertools import combinations

import numpy as np
import pytest
from sklearn.linear_model import Lasso as SkLasso

from ocbsparse import (
    BudgetError,
    ConvergenceError,
    ParameterError,
    ProblemInstance,
    RangeError,
    SupportMask,
    generate_instance,
    ls_refit,
)
from ocbsparse.core import random_mask
from ocbsparse.solvers import (
    ApproximateMessagePassing,
    ExhaustiveL0,
    LassoCD,
    OrthogonalMatchingPursuit,
    amp,
    amp_arrays,
    exhaustive_search,
    lambda_max,
    lasso_arrays,
    lasso_solve,
    omp,
    tune_lambda,
)


# ---------------------------------------------------------------- exhaustive

def test_exhaustive_toy_matches_per_mask_refits():
    inst = generate_instance(2, 0.5, 1.0, 3)
    sol, hist = exhaustive_search(inst, 0.5)
    oracle = min(ls_refit(inst, SupportMask.from_indices([j], 4)).epsilon for j in range(4))
    assert sol.epsilon == pytest.approx(oracle, abs=1e-15)
    assert hist.total == 4


def test_exhaustive_histogram_total():
    inst = generate_instance(10, 0.5, 1.0, 1)
    sol, hist = exhaustive_search(inst, 0.2)
    assert hist.total == math.comb(20, 2) == 190
    assert hist.epsilon_values[0] == sol.epsilon
    assert np.all(np.diff(hist.epsilon_values) >= 0)


def test_exhaustive_square_full_rate():
    inst = generate_instance(4, 0.5, 1.0, 2)
    sol, _ = exhaustive_search(inst, 1.0)
    assert sol.epsilon < 1e-20


def test_exhaustive_minimum_is_global(inst_factory):
    inst = inst_factory(M=8, seed=5)
    sol, _ = exhaustive_search(inst, 0.25)
    brute = min(ls_refit(inst, SupportMask.from_indices(c, 16)).epsilon for c in combinations(range(16), 2))
    assert sol.epsilon == pytest.approx(brute, rel=1e-12)


def test_exhaustive_phi0_at_zero_counts_masks():
    inst = generate_instance(10, 0.5, 1.0, 1)
    _, hist = exhaustive_search(inst, 0.3)
    assert hist.phi0(0.0) == pytest.approx(math.log(math.comb(20, 3)) / 10, rel=1e-12)


def test_exhaustive_budget():
    inst = generate_instance(20, 0.5, 1.0, 0)
    with pytest.raises(BudgetError, match="mcmc"):
        exhaustive_search(inst, 0.5, budget=1000)


# ---------------------------------------------------------------- LASSO

def _kkt_ok(A, y, x, lam, tol):
    g = A.T @ (y - A @ x)
    on = x != 0
    return (np.all(np.abs(g[~on]) <= lam + tol)
            and np.all(np.abs(g[on] - lam * np.sign(x[on])) <= tol))


def test_lasso_zero_above_lambda_max(inst_factory):
    inst = inst_factory()
    sol, diag = lasso_solve(inst, lambda_max(inst.A, inst.y) * 1.0001)
    assert sol.support.k == 0 and diag.support_size == 0


def test_lasso_scalar_closed_form():
    a = np.array([1.0, 2.0, -0.5])
    y = np.array([0.3, 1.1, 0.2])
    lam = 0.4
    inst = ProblemInstance.from_arrays(y, a[:, None])
    sol, _ = lasso_solve(inst, lam)
    n2 = a @ a
    z = a @ y / n2
    expected = np.sign(z) * max(abs(z) - lam / n2, 0.0)
    assert sol.x[0] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.0])
def test_lasso_kkt(inst_factory, lam):
    inst = inst_factory(M=60, seed=11)
    sol, diag = lasso_solve(inst, lam, tol=1e-10)
    assert diag.kkt_residual <= 1e-10
    assert _kkt_ok(inst.A, inst.y, sol.x, lam, 1e-10)


def test_lasso_matches_sklearn(inst_factory):
    inst = inst_factory(M=40, seed=2)
    lam = 0.8
    sol, _ = lasso_solve(inst, lam, tol=1e-12)
    sk = SkLasso(alpha=lam / inst.M, fit_intercept=False, tol=1e-14, max_iter=1_000_000).fit(inst.A, inst.y)
    assert np.max(np.abs(sk.coef_ - sol.x)) < 1e-7


def test_lasso_iteration_cap_raises_with_best(inst_factory):
    inst = inst_factory(M=60)
    with pytest.raises(ConvergenceError) as exc:
        lasso_arrays(inst.A, inst.y, 0.05, tol=1e-14, max_sweeps=2)
    assert exc.value.best is not None


def test_tune_lambda_target_zero(inst_factory):
    inst = inst_factory()
    assert tune_lambda(inst, 0.0) == pytest.approx(lambda_max(inst.A, inst.y))


def test_tune_lambda_hits_target_and_monotone(inst_factory):
    inst = inst_factory(M=80, seed=3)
    lam, trace = tune_lambda(inst, 0.4, return_trace=True)
    _, diag = lasso_solve(inst, lam)
    assert abs(diag.support_size - 32) <= 0.5
    pts = sorted(trace)
    ks = [k for _, k in pts]
    assert all(a >= b for a, b in zip(ks, ks[1:]))


def test_tune_lambda_out_of_domain(inst_factory):
    with pytest.raises(ParameterError):
        tune_lambda(inst_factory(M=20), 1.5)


def test_tune_lambda_unreachable(inst_factory):
    # 10.25 coefficients cannot be hit within 2e-5 coefficients.
    with pytest.raises(RangeError):
        tune_lambda(inst_factory(M=20), 0.5125, tol_r=1e-6)


# ---------------------------------------------------------------- OMP

def test_omp_one_sparse_exact():
    M, N = 8, 12
    A = np.zeros((M, N))
    A[:, 5] = np.eye(M)[0]
    rest = [j for j in range(N) if j != 5]
    for c, j in enumerate(rest):
        A[1 + c % (M - 1), j] = 1.0
    inst = ProblemInstance.from_arrays(3 * A[:, 5], A)
    sol, path = omp(inst, 1 / 8, return_path=True)
    assert path.selected[0] == 5
    assert sol.epsilon < 1e-25


def test_omp_dominated_by_exhaustive():
    ties = 0
    for s in range(30):
        inst = generate_instance(8, 0.5, 1.0, 100 + s)
        e_omp = omp(inst, 0.25).epsilon
        e_ex, _ = exhaustive_search(inst, 0.25)
        assert e_omp >= e_ex.epsilon - 1e-12
        ties += abs(e_omp - e_ex.epsilon) < 1e-12
    assert 0 < ties < 30


def test_omp_path_properties(inst_factory):
    inst = inst_factory(M=30, seed=8)
    sol, path = omp(inst, 0.5, return_path=True)
    assert np.all(np.diff(path.residual_norms) <= 1e-12)
    S = []
    for j in path.selected:
        x = np.zeros(inst.N)
        if S:
            x = ls_refit(inst, SupportMask.from_indices(S, inst.N)).x
        corr = np.abs(inst.A.T @ (inst.y - inst.A @ x))
        corr[S] = -1
        assert corr[j] == pytest.approx(corr.max(), rel=1e-10)
        S.append(j)
    assert sol.support == SupportMask.from_indices(S, inst.N)
    assert sol.epsilon == pytest.approx(ls_refit(inst, sol.support).epsilon, rel=1e-10)


def test_exhaustive_omp_random_ordering():
    rng = np.random.default_rng(4)
    omp_beats_random = 0
    for s in range(20):
        inst = generate_instance(8, 0.5, 1.0, 200 + s)
        ex, _ = exhaustive_search(inst, 0.25)
        om = omp(inst, 0.25)
        rnd = ls_refit(inst, random_mask(inst.N, 2, rng))
        assert ex.epsilon <= om.epsilon + 1e-12
        assert ex.epsilon <= rnd.epsilon + 1e-12
        omp_beats_random += om.epsilon <= rnd.epsilon + 1e-12
    # Greedy is not guaranteed to beat every random mask; it should on nearly all.
    assert omp_beats_random >= 18


# ---------------------------------------------------------------- AMP

def test_amp_zero_fixed_point(inst_factory):
    inst = inst_factory()
    sol, state = amp(inst, lambda_max(inst.A, inst.y) * 1.01)
    assert sol.support.k == 0 and state.chi == 0.0


def test_amp_kkt_and_qhat(inst_factory):
    inst = inst_factory(M=100, seed=12)
    tol = 1e-10
    sol, state = amp(inst, 1.0, tol=tol)
    assert state.Q_hat == pytest.approx(1 / (1 + state.chi))
    assert _kkt_ok(inst.A, inst.y, sol.x, 1.0, 1e-6)


def test_amp_batched_columns_match_single(inst_factory):
    inst = inst_factory(M=50, seed=1)
    Y = np.column_stack([inst.y, -0.5 * inst.y, inst.y[::-1].copy()])
    X = amp_arrays(inst.A, Y, 1.0)[0]
    for j in range(3):
        x = amp_arrays(inst.A, Y[:, j], 1.0)[0]
        assert np.max(np.abs(X[:, j] - x)) < 1e-9


def test_amp_divergence_flagged():
    from ocbsparse.exceptions import DivergenceError
    rng = np.random.default_rng(0)
    A = rng.normal(size=(10, 40)) * 5.0
    with pytest.raises(DivergenceError, match="smaller delta"):
        amp_arrays(A, rng.normal(size=10), 1e-3, delta=1.0, max_iter=2000)


def test_amp_iteration_cap(inst_factory):
    inst = inst_factory(M=50)
    with pytest.raises(ConvergenceError):
        amp(inst, 0.5, tol=1e-15, max_iter=3)


# ---------------------------------------------------------------- estimators

def test_estimators_fit_predict(inst_factory):
    inst = inst_factory(M=40, seed=6)
    X, y = inst.A, inst.y
    for est in (LassoCD(lam=1.0), LassoCD(lam=1.0, refit=True), ApproximateMessagePassing(lam=1.0),
                OrthogonalMatchingPursuit(r=0.25), ExhaustiveL0(r=0.05)):
        est.fit(X, y)
        assert est.coef_.shape == (inst.N,)
        assert np.allclose(est.predict(X), X @ est.coef_)
        assert est.distortion_ == pytest.approx(np.sum((y - X @ est.coef_) ** 2) / (2 * inst.M))


def test_estimator_refit_improves(inst_factory):
    inst = inst_factory(M=40, seed=6)
    plain = LassoCD(lam=1.0).fit(inst.A, inst.y)
    refit = LassoCD(lam=1.0, refit=True).fit(inst.A, inst.y)
    assert refit.distortion_ <= plain.distortion_
    assert np.array_equal(refit.support_, plain.support_)


def test_estimator_params_round_trip():
    from sklearn.base import clone
    est = OrthogonalMatchingPursuit(r=0.3)
    assert clone(est).get_params() == {"r": 0.3}
