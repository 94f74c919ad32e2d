"""End-to-end acceptance checks; each test records one PASS/FAIL line in the summary."""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from twolevel import bar, des, dists, limits, mm1exact, sde
from twolevel.limits import LimitDistribution
from twolevel.metrics import ks_lattice
from twolevel.model import HeavyTrafficFamily, exponential_params, instantiate


def _record(k: int, ok: bool, detail: str):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _exact(fam, r):
    return mm1exact.solve_recursive(instantiate(fam, r))


def _ks_exact(fam, r):
    sol = _exact(fam, r)
    pmf = sol.marginal(sol.n + int(60 / r))
    return ks_lattice(pmf, r, lambda x: limits.mixture_cdf(fam.limit_distribution(), x))


def test_c1_recursive_matches_dense():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        ell = (1, 5, 10, 50)[i % 4]
        mu = rng.uniform(0.5, 2.0)
        c1, c2 = rng.uniform(0.5, 2.0, size=2)
        lam1 = c1 * mu if i % 5 == 0 else rng.uniform(0.3, 1.5) * c1 * mu
        lam2 = rng.uniform(0.2, 0.95) * c2 * mu
        p = exponential_params(ell, lam1, lam2, mu, c1, c2)
        a, b = mm1exact.solve_recursive(p), mm1exact.solve_dense(p)
        diff = max(np.max(np.abs(a.p1 - b.p1)), np.max(np.abs(a.p2 - b.p2)), abs(a.p3 - b.p3))
        worst = max(worst, diff)
    dt = time.perf_counter() - t0
    _record(1, worst <= 1e-10 and dt < 1.0, f"max abs diff {worst:.2e}, {dt:.2f} s")


def test_c2_exponential_convergence(exp_family):
    rs = (0.1, 0.05, 0.02, 0.01)
    ks = [_ks_exact(exp_family, r) for r in rs]
    ld = exp_family.limit_distribution()
    a1, _ = limits.exp_weights(ld.beta1, ld.beta2, ld.ell1, ld.b1_is_zero)
    gap = abs(_exact(exp_family, 0.01).p_at_or_below() - a1)
    ok = all(x > y for x, y in zip(ks, ks[1:])) and ks[-1] <= 0.05 and gap <= 0.03
    _record(2, ok, "KS " + " ".join(f"{k:.4f}" for k in ks) + f", weight gap {gap:.4f}")


def test_c3_mean_limit():
    out = []
    ok = True
    for b1 in (0.0, 0.5):
        fam = HeavyTrafficFamily(mu=1.0, c1=1.0, c2=1.0, b1=b1, b2=1.0, ell1=1.0)
        ld = fam.limit_distribution()
        ref = limits.mean_L_limit(ld.b1, ld.b2, ld.c1, ld.c2, ld.sigma1_sq, ld.sigma2_sq, ld.ell1)
        sol = _exact(fam, 0.01)
        got = sol.p_zero() * sol.mean_L()
        rel = abs(got / ref - 1)
        ok &= rel <= 0.05
        out.append(f"b1={b1}: {got:.4f} vs {ref:.4f} ({rel:.1%})")
    _record(3, ok, "; ".join(out))


def test_c4_simulator_vs_oracle(exp_family):
    r = 0.05
    p = instantiate(exp_family, r)
    t0 = time.perf_counter()
    est = des.run(p, 10**7, seed=11, cap=1 / r, r=r)
    sol = mm1exact.solve_dense(p)
    pmf = est.time_pmf
    exact = sol.marginal(len(pmf) - 2)
    exact = np.append(exact, max(0.0, 1 - exact.sum()))
    tv = 0.5 * np.abs(pmf - exact).sum()
    ids = des.palm_identity_residuals(est)
    za = abs(ids["alpha_e=alpha_s"]["z"])
    zl = ids["level_crossing"]["max_abs_z"]
    dt = time.perf_counter() - t0
    ok = tv <= 0.01 and za <= 3 and zl <= 4 and dt <= 120
    _record(4, ok, f"TV {tv:.4f}, alpha z {za:.2f}, level-crossing max z {zl:.2f}, {dt:.1f} s")


def test_c5_erlang_arrivals(erlang_family):
    r = 0.02
    p = instantiate(erlang_family, r)
    rep = des.replicate(p, 5, seed=21, horizon=10**7, cap=1 / r, r=r)
    ld = erlang_family.limit_distribution()
    ks = ks_lattice(rep.pooled.time_pmf[:-1], r, lambda x: limits.mixture_cdf(ld, x))
    events = sum(e.events for e in rep.runs)
    _record(5, ks <= 0.05 and events >= 5 * 10**7, f"KS {ks:.4f} over {events:.1e} events")


def test_c6_eta_zeta_expansions():
    rs = (0.1, 0.05, 0.025, 0.0125)
    ok = True
    worst_det = 0.0
    for theta in (-1.0, 1.0):
        for role in ("arrival", "service"):
            errs = [bar.expansion_error(dists.exponential(1.0), role, theta, r) / r**2 for r in rs]
            ok &= all(a > b for a, b in zip(errs, errs[1:]))
            for r in rs:
                worst_det = max(worst_det,
                                bar.expansion_error(dists.deterministic(1.0), role, theta, r) / r**2)
    ok &= worst_det <= 1e-10
    _record(6, ok, f"exponential ratios decreasing, deterministic max err/r^2 {worst_det:.1e}")


def _ld(c1=1.0, c2=1.0, b1=0.5):
    return LimitDistribution(ell1=1.0, b1=b1, b2=1.0, c1=c1, c2=c2, mu=1.0, sigma1_sq=2.0,
                             sigma2_sq=2.0)


def test_c7_limit_bar():
    grid = max(bar.limit_bar_residual(_ld(c1=1.3, c2=0.8), t1, t2)
               for t1 in (-2, -1, 0, 1, 2) for t2 in (-2, -1, 0))
    same = max(bar.diffusion_bar_residual(_ld(), t) for t in (-2, -1, -0.5, 0))
    other = bar.diffusion_bar_residual(_ld(c1=1.5, c2=0.8), -1.0)
    ok = grid <= 1e-8 and same <= 1e-8 and other > 1e-3
    _record(7, ok, f"grid {grid:.1e}, c1=c2 {same:.1e}, c1!=c2 {other:.2e}")


def test_c8_sde_stationary_law(exp_family):
    ld = exp_family.limit_distribution()
    spec = sde.DiffusionSpec.from_limit(ld, h=1e-3, seed=3)
    law = sde.simulate_stationary(spec, n_samples=10**6)
    ks = law.ks_to(lambda x: limits.mixture_cdf(ld, x))
    # single regime: reflected BM with drift 1 and variance 1 has mean 1/2
    ctrl = sde.DiffusionSpec(ell1=0.0, drift1=1.0, drift2=1.0, vol1=1.0, vol2=1.0, h=1e-3, seed=4)
    m = sde.simulate_stationary(ctrl, n_samples=10**6, z0=0.0).mean
    ok = ks <= 0.02 and abs(m / 0.5 - 1) <= 0.04
    _record(8, ok, f"KS {ks:.4f}, control mean {m:.4f} vs 0.5")


def test_c9_cycle_fraction(exp_family):
    a1 = exp_family.limit_distribution().A[0]
    gaps = []
    for r in (0.1, 0.05, 0.02):
        est = des.run(instantiate(exp_family, r), int(2e7 * 0.1 / r), seed=31, cap=1 / r, r=r)
        gaps.append(abs(est.p_at_or_below - a1))
    ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 0.03
    _record(9, ok, "gaps " + " ".join(f"{g:.4f}" for g in gaps))


def test_c10_delta_E_identities(exp_family):
    res, plain, esum = [], [], []
    for r in (0.1, 0.05, 0.02):
        p = instantiate(exp_family, r)
        est = des.run(p, int(2e6 * (0.1 / r) ** 3), seed=41, cap=1 / r, r=r)
        d = des.delta_E_estimates(est, p, r, exp_family.b1, exp_family.b2)
        res.append(d.resid2_cv_over_r)
        plain.append(d.resid2_over_r)
        esum.append(abs(d.E1 + d.E2))
    ok = (all(a > b for a, b in zip(res, res[1:])) and res[-1] <= 0.02
          and all(a > b for a, b in zip(esum, esum[1:])))
    _record(10, ok, "residual/r " + " ".join(f"{x:.1e}" for x in res)
            + "; plain " + " ".join(f"{x:.1e}" for x in plain)
            + "; |E1+E2| " + " ".join(f"{x:.1e}" for x in esum))
