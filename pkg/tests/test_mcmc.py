import math
from itertools import combinations, product
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.stats import chisquare

from ocbsparse import OverlapError, ParameterError, SupportMask, generate_instance, ls_refit
from ocbsparse.core import random_mask
from ocbsparse.mcmc import (
    McRun,
    TemperatureLadder,
    default_steps,
    exchange_step,
    mc_pair_flip,
    multi_histogram_phi0,
    run_exchange_mc,
    solve_wham,
)
from ocbsparse.solvers import exhaustive_search


def _energies(inst, k):
    combos = list(combinations(range(inst.N), k))
    E = np.array([inst.M * ls_refit(inst, SupportMask.from_indices(c, inst.N)).epsilon for c in combos])
    return combos, E


# ---------------------------------------------------------------- ladder / steps

def test_default_steps_table():
    assert default_steps(30, 0.2) == 20_000
    assert default_steps(40, 0.4) == 300_000
    assert default_steps(15, 0.4) == 20_000


def test_ladder_geometric_and_defaults():
    lad = TemperatureLadder.default(0.2)
    assert lad.T == 15
    assert lad.mu_values[0] == pytest.approx(1.0) and lad.mu_values[-1] == pytest.approx(10.0)
    assert np.allclose(np.diff(np.log(lad.mu_values)), np.log(10) / 14)
    assert TemperatureLadder.default(0.4).mu_values[-1] == pytest.approx(35.0)


def test_ladder_rejects_unsorted():
    with pytest.raises(ParameterError):
        TemperatureLadder(np.array([1.0, 0.5]))


# ---------------------------------------------------------------- single moves

def test_pair_flip_preserves_k_and_downhill_always_accepted(inst_factory):
    inst = inst_factory(M=10)
    rng = np.random.default_rng(0)
    state = random_mask(inst.N, 4, rng)
    e = inst.M * ls_refit(inst, state).epsilon
    for _ in range(200):
        prev_e = e
        new, e = mc_pair_flip(state, inst, 3.0, rng, energy=e)
        assert new.k == 4
        if new != state:
            assert e == pytest.approx(inst.M * ls_refit(inst, new).epsilon)
        else:
            assert e == prev_e
        state = new


def test_pair_flip_downhill_accepted():
    inst = generate_instance(6, 0.5, 1.0, 1)
    combos, E = _energies(inst, 2)
    worst = SupportMask.from_indices(combos[int(np.argmax(E))], inst.N)
    rng = np.random.default_rng(3)
    for _ in range(20):
        new, e = mc_pair_flip(worst, inst, 1e6, rng)
        assert new != worst and e < E.max()


def test_pair_flip_infinite_temperature_always_accepts():
    inst = generate_instance(6, 0.5, 1.0, 1)
    rng = np.random.default_rng(5)
    state = SupportMask.from_indices([0, 1], inst.N)
    for _ in range(100):
        new, _ = mc_pair_flip(state, inst, 0.0, rng)
        assert new != state
        state = new


def test_exchange_equal_energies_and_equal_temperatures():
    rng = np.random.default_rng(0)
    lad = TemperatureLadder(np.array([1.0, 2.0, 5.0]))
    _, _, acc = exchange_step(["a", "b", "c"], [1.0, 1.0, 1.0], lad, rng)
    assert acc.all()
    flat = SimpleNamespace(mu_values=np.array([2.0, 2.0]))
    for _ in range(20):
        _, _, acc = exchange_step(["a", "b"], [0.0, 50.0], flat, rng)
        assert acc.all()


def test_exchange_swaps_states_and_energies():
    lad = TemperatureLadder(np.array([1.0, 2.0]))
    states, energies, acc = exchange_step(["hot", "cold"], [0.1, 3.0], lad, np.random.default_rng(0))
    assert acc[0] and states == ["cold", "hot"] and energies == [3.0, 0.1]


# ---------------------------------------------------------------- chains

def test_run_is_deterministic_and_shaped():
    inst = generate_instance(10, 0.5, 1.0, 2)
    lad = TemperatureLadder.geometric(1, 10, 5)
    a = run_exchange_mc(inst, 0.4, lad, steps=500, seed=9)
    b = run_exchange_mc(inst, 0.4, lad, steps=500, seed=9)
    assert a.energies.shape == (250, 5) and a.burn_in == 250
    assert a.energies.tobytes() == b.energies.tobytes()
    assert np.array_equal(a.swap_acceptance, b.swap_acceptance)
    c = run_exchange_mc(inst, 0.4, lad, steps=500, seed=10)
    assert not np.array_equal(a.energies, c.energies)


def test_chain_energies_are_refit_energies():
    inst = generate_instance(8, 0.5, 1.0, 4)
    lad = TemperatureLadder.geometric(1, 5, 3)
    run = run_exchange_mc(inst, 0.25, lad, steps=200, seed=1, record_masks=True)
    for s in (0, 50, 99):
        for t in range(3):
            mask = SupportMask.from_indices(run.masks[s, t], inst.N)
            assert mask.k == 2
            assert run.energies[s, t] == pytest.approx(inst.M * ls_refit(inst, mask).epsilon, rel=1e-9)


def test_two_temperature_joint_distribution():
    # M=2, N=4, k=1: 16 joint states; stationary law is the product of Gibbs measures.
    inst = generate_instance(2, 0.5, 1.0, 7)
    combos, E = _energies(inst, 1)
    lad = TemperatureLadder(np.array([0.7, 2.5]))
    run = run_exchange_mc(inst, 0.5, lad, steps=40_000, seed=2, record_masks=True)
    states = run.masks[::5, :, 0]
    p = [np.exp(-mu * (E - E.min())) / np.exp(-mu * (E - E.min())).sum() for mu in lad.mu_values]
    joint = np.array([p[0][i] * p[1][j] for i, j in product(range(4), range(4))])
    counts = np.bincount(states[:, 0] * 4 + states[:, 1], minlength=16)
    assert chisquare(counts, joint * counts.sum()).pvalue > 0.01


def test_csv_and_sidecar(tmp_path):
    inst = generate_instance(6, 0.5, 1.0, 1)
    run = run_exchange_mc(inst, 1 / 3, TemperatureLadder.geometric(1, 3, 2), steps=10, seed=0)
    run.save(tmp_path / "r.csv", tmp_path / "r.json")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "step,temperature_index,energy"
    assert len(lines) == 1 + 5 * 2
    assert lines[1].startswith("6,0,")
    import json
    side = json.loads((tmp_path / "r.json").read_text())
    assert side["burn_in"] == 5 and len(side["ladder"]) == 2


# ---------------------------------------------------------------- WHAM

def test_wham_phi0_at_zero_counts_masks():
    inst = generate_instance(10, 0.5, 1.0, 3)
    run = run_exchange_mc(inst, 0.4, TemperatureLadder.geometric(0.5, 5, 6), steps=4000, seed=1)
    w = multi_histogram_phi0(run, mu_grid=[0.0])
    assert w.phi0[0] == pytest.approx(math.log(math.comb(20, 4)) / 10, abs=1e-12)


def test_wham_matches_exhaustive_small():
    inst = generate_instance(10, 0.5, 1.0, 5)
    _, hist = exhaustive_search(inst, 0.4)
    lad = TemperatureLadder.default(0.4)
    run = run_exchange_mc(inst, 0.4, lad, steps=6000, seed=3)
    w = multi_histogram_phi0(run)
    assert np.max(np.abs(w.phi0 - hist.phi0(lad.mu_values))) < 1e-2
    assert np.max(np.abs(w.epsilon - hist.mean_epsilon(lad.mu_values))) < 2e-2


def _block_se(x, nblocks=20):
    b = np.array_split(x, nblocks)
    return np.std([c.mean() for c in b], ddof=1) / math.sqrt(nblocks)


def test_wham_reproduces_chain_means():
    inst = generate_instance(15, 0.5, 1.0, 8)
    lad = TemperatureLadder.default(0.4)
    run = run_exchange_mc(inst, 0.4, lad, steps=20_000, seed=4)
    w = multi_histogram_phi0(run)
    for t in range(lad.T):
        chain = run.energies[:, t]
        se = _block_se(chain)
        if se == 0:
            continue
        assert abs(w.epsilon[t] * inst.M - chain.mean()) <= 2 * se + 1e-9


def test_wham_entropy_concave():
    inst = generate_instance(15, 0.5, 1.0, 9)
    lad = TemperatureLadder.default(0.4)
    run = run_exchange_mc(inst, 0.4, lad, steps=20_000, seed=6)
    mu = np.geomspace(1, 35, 60)
    w = multi_histogram_phi0(run, mu_grid=mu)
    eps, s = w.epsilon, w.entropy
    # ds/deps = mu along the Legendre curve, so concavity means mu grows as eps falls.
    slope = np.diff(s) / np.diff(eps)
    assert np.all(np.diff(eps) < 0)
    assert np.all(np.diff(slope) >= -1e-6 * np.abs(slope[1:]).max())


def test_wham_overlap_error():
    run = McRun(energies=np.array([[1.0, 10.0], [1.5, 11.0]]), swap_acceptance=np.zeros(1),
                flip_acceptance=np.zeros(2), steps=4, burn_in=2,
                ladder=TemperatureLadder(np.array([1.0, 2.0])), seed=0, M=4, N=8, k=2)
    with pytest.raises(OverlapError) as exc:
        multi_histogram_phi0(run)
    assert exc.value.pair == (0, 1)


def test_solve_wham_single_state_is_trivial():
    f, it, res = solve_wham(np.array([0.0, 1.0]), np.array([3, 1]), np.array([1.0]), np.array([4]))
    assert f[0] == 0.0 and res <= 1e-10
