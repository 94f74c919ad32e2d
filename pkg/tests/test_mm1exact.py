import math

import numpy as np
import pytest

from twolevel import limits, mm1exact
from twolevel.model import exponential_params, instantiate


def test_single_regime_is_geometric():
    p = exponential_params(7, 0.6, 0.6, 1.0)
    sol = mm1exact.solve_dense(p)
    lv = np.arange(40)
    assert np.max(np.abs(sol.marginal(39) - 0.4 * 0.6**lv)) < 1e-12


def test_small_instance_mass_and_balance():
    sol = mm1exact.solve_dense(exponential_params(1, 0.95, 0.9, 1.0))
    assert sol.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert np.max(mm1exact.balance_residuals(sol, relative=True)) < 1e-12
    assert min(sol.p1.min(), sol.p2.min(), sol.p3) >= 0


@pytest.mark.parametrize("lam1, lam2, n", [(0.95, 0.9, 10), (1.2, 0.5, 6), (0.3, 0.7, 12)])
def test_p2_geometric_below_threshold(lam1, lam2, n):
    sol = mm1exact.solve_dense(exponential_params(n, lam1, lam2, 1.0))
    for l in range(1, n):
        assert sol.p2[l] / sol.p2[n] == pytest.approx(sol.g ** (n - l), rel=1e-12)


def test_recursive_matches_dense():
    p = exponential_params(10, 0.95, 0.9, 1.0)
    a, b = mm1exact.solve_dense(p), mm1exact.solve_recursive(p)
    assert max(np.max(np.abs(a.p1 - b.p1)), np.max(np.abs(a.p2 - b.p2)), abs(a.p3 - b.p3)) < 1e-10


def test_recursive_balance_is_tight_relative():
    sol = mm1exact.solve_recursive(exponential_params(40, 1.0, 0.8, 1.0, c2=1.0))
    assert np.max(mm1exact.balance_residuals(sol, relative=True)) < 1e-12


def test_tail_and_boundary_examples():
    sol = mm1exact.ChainSolution(3, 0.9, 0.5, 1.0, 1.0, np.zeros(4), np.zeros(4), 0.1)
    assert sol.p3_at(6) == pytest.approx(0.025)
    p = exponential_params(5, 0.9, 0.7, 1.0)
    rec = mm1exact.solve_recursive(p)
    assert rec.p2[5] == pytest.approx(0.9 * rec.p1[5], rel=1e-12)


@pytest.mark.parametrize("lam1, lam2", [(0.95, 0.9), (0.8, 0.6)])
def test_p1_closed_form(lam1, lam2):
    sol = mm1exact.solve_recursive(exponential_params(15, lam1, lam2, 1.0))
    for k in range(16):
        assert mm1exact.p1_closed(sol, k) == pytest.approx(sol.p1[k], rel=1e-9, abs=1e-14)


def test_mgf_examples(exp_family):
    sol = mm1exact.solve_dense(instantiate(exp_family, 0.05))
    assert sol.n == 20
    assert mm1exact.mgf_closed(sol, 0.05, 0.0)[3] == pytest.approx(1.0, abs=1e-12)
    got = mm1exact.mgf_closed(sol, 0.05, -0.5)
    ref = mm1exact.mgf_direct(sol, 0.05, -0.5)
    assert np.max(np.abs(np.array(got) - np.array(ref))) < 1e-10


@pytest.mark.parametrize("theta", [-2.0, 0.7, 1e-9])
def test_mgf_closed_vs_direct(exp_family, theta):
    sol = mm1exact.solve_recursive(instantiate(exp_family, 0.1))
    assert mm1exact.mgf_closed(sol, 0.1, theta) == pytest.approx(mm1exact.mgf_direct(sol, 0.1, theta), rel=1e-9)


def test_g3_blows_up_near_pole(exp_family):
    r = 0.1
    sol = mm1exact.solve_dense(instantiate(exp_family, r))
    pole = -math.log(sol.rho22) / r
    vals = [mm1exact.mgf_closed(sol, r, pole * (1 - e))[2] for e in (1e-1, 1e-2, 1e-3)]
    assert vals[0] < vals[1] < vals[2]


def test_scaled_distribution(exp_family):
    r = 0.05
    sol = mm1exact.solve_dense(instantiate(exp_family, r))
    law = mm1exact.scaled_distribution(sol, r)
    assert law.pmf[0] == pytest.approx(sol.p1[0] + sol.p2[0])
    assert law.pmf.sum() == pytest.approx(1.0, abs=1e-12)


def test_boundary_ratios_converge(exp_family):
    ld = exp_family.limit_distribution()
    lim = mm1exact.boundary_ratio_limits(1.0, 1.0, ld.beta1, ld.ell1)
    assert lim[2] == pytest.approx(2 * math.exp(0.5))
    errs = []
    for r in (0.1, 0.05, 0.01):
        got = mm1exact.boundary_ratios(mm1exact.solve_recursive(instantiate(exp_family, r)))
        errs.append(max(abs(g - l) for g, l in zip(got, lim)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05 * lim[2]


def test_p1ell_limit_example():
    assert mm1exact.p1ell_limit(1, 1, 1, 1, math.log(2)) == pytest.approx(0.25)


def test_p1ell_sweep(exp_family):
    ld = exp_family.limit_distribution()
    lim = mm1exact.p1ell_limit(1, 1, ld.beta1, ld.beta2, ld.ell1)
    errs = [abs(mm1exact.p1ell_scaled(mm1exact.solve_recursive(instantiate(exp_family, r)), r) - lim)
            for r in (0.1, 0.05, 0.02, 0.01)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.05 * lim


def test_non_exponential_rejected(erlang_family):
    with pytest.raises(ValueError):
        mm1exact.solve_dense(instantiate(erlang_family, 0.1))


def test_b1_zero_branch_solves():
    p = exponential_params(50, 1.0, 0.9, 1.0)
    a, b = mm1exact.solve_dense(p), mm1exact.solve_recursive(p)
    assert np.max(np.abs(a.p1 - b.p1)) < 1e-10
