"""End-to-end acceptance checks, one per numbered requirement.

Each test prints a single PASS line on success; tolerances and budgets are
stated inline.  The long Monte Carlo checks carry the ``slow`` marker.
"""

import json
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from mpmath import mp, mpf

from evtlab import (ArcSet, ExperimentPlan, affine_mod1, analytic_multiplicity,
                    analytic_theta, boundedlog, boundedpower, compete,
                    evaluate, exceedance_measure, exceedance_region, iterate,
                    lsv, make_correlated_spec, make_uncorrelated_spec, neglog,
                    oracle_cluster_sets, powerlaw, return_time_table,
                    run_experiment, select_q, solve_threshold)
from evtlab.simulate import ASCENDING_STEP, compare_induced_repp
from evtlab.tails import FRECHET, WEIBULL

F = Fraction


def ok(num, msg):
    print(f"PASS criterion {num}: {msg}")


@pytest.fixture(scope="module")
def doubling():
    return affine_mod1(2)


@pytest.fixture(scope="module")
def tripling():
    return affine_mod1(3)


@pytest.fixture(scope="module")
def spec_nonper(doubling):
    with mp.workprec(80):
        zeta = mp.sqrt(2) / 16
    return make_correlated_spec(
        doubling, zeta,
        [(0, neglog()), (1, powerlaw(F(1, 2))), (3, powerlaw(F(1, 2)))])


@pytest.fixture(scope="module")
def spec_per(doubling):
    return make_correlated_spec(
        doubling, F(1, 31),
        [(0, neglog()), (1, powerlaw(F(1, 2))), (3, powerlaw(F(1, 2)))],
        periodic=5)


@pytest.fixture(scope="module")
def spec_pattern(tripling):
    return make_correlated_spec(
        tripling, F(1, 4), [(0, neglog()), (1, powerlaw(F(1, 3)))],
        periodic=2)


@pytest.fixture(scope="module")
def mc_run(spec_nonper, doubling):
    """Shared Monte Carlo run for criteria 7 and 8."""
    plan = ExperimentPlan(n=10**5, orbits=2000, seed=20260824, tau=20.0, q=3)
    return run_experiment(spec_nonper, doubling, plan)


def test_criterion_01_exact_theta_nonperiodic(spec_nonper, doubling):
    t0 = time.perf_counter()
    res = analytic_theta(spec_nonper, doubling)
    dt = time.perf_counter() - t0
    assert res.theta == F(7, 8)
    assert dt < 1.0
    ok(1, f"theta = 7/8 exactly in {dt * 1000:.1f} ms")


def test_criterion_02_exact_multiplicity_nonperiodic(spec_nonper, doubling):
    t0 = time.perf_counter()
    mult = analytic_multiplicity(spec_nonper, doubling, k_max=8)
    dt = time.perf_counter() - t0
    pis = [mult.pi(k) for k in range(1, 9)]
    assert pis == [F(6, 7), F(1, 7), 0, 0, 0, 0, 0, 0]
    assert dt < 1.0
    ok(2, f"pi = (6/7, 1/7, 0, ...) exactly in {dt * 1000:.1f} ms")


def test_criterion_03_exact_periodic(spec_per, doubling):
    t0 = time.perf_counter()
    res = analytic_theta(spec_per, doubling)
    mult = analytic_multiplicity(spec_per, doubling, k_max=12)
    dt = time.perf_counter() - t0
    assert res.theta == F(13, 16)
    for ell in range(6):
        assert mult.pi(2 * ell + 1) == F(21, 26) * F(1, 32) ** ell
    for ell in range(1, 7):
        assert mult.pi(2 * ell) == F(67, 13) * F(1, 32) ** ell
    assert mult.tail_start is not None and mult.tail_period == 2 \
        and mult.tail_ratio == F(1, 32)
    assert dt < 1.0
    ok(3, f"theta = 13/16, pi formulas to k = 12, geometric tail, "
          f"{dt * 1000:.1f} ms")


def test_criterion_04_mass_and_mean(spec_nonper, spec_per, doubling):
    for spec, mean in ((spec_nonper, F(8, 7)), (spec_per, F(16, 13))):
        mult = analytic_multiplicity(spec, doubling, k_max=12)
        assert mult.total_mass() == 1
        assert mult.mean_cluster_size() == mean
        assert mult.mean_cluster_size() == 1 / analytic_theta(spec, doubling).theta
    ok(4, "sum pi = 1 and mean cluster size = 1/theta (8/7 and 16/13) exactly")


def test_criterion_05_threshold_solver(spec_pattern):
    solve_threshold(spec_pattern, 2000, 80)          # warm the mpmath path
    t0 = time.perf_counter()
    u = solve_threshold(spec_pattern, 2000, 80)      # 2(e^-u + u^-3) = 0.04
    dt = time.perf_counter() - t0
    err = abs(float(u) - 4.619613119957849)
    assert err < 1e-9
    assert dt < 0.010
    ok(5, f"u = {float(u):.15f} (err {err:.2e}) in {dt * 1000:.2f} ms")


def test_criterion_06_oracle_convergence(spec_nonper, doubling):
    t0 = time.perf_counter()
    gaps = []
    for u in (10, 15, 20, 25):
        r = oracle_cluster_sets(spec_nonper, doubling, u, 3)
        gaps.append(abs(float(r.theta_n) - 7 / 8))
    dt = time.perf_counter() - t0
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3
    assert dt < 30
    ok(6, f"theta_n gaps {['%.1e' % g for g in gaps]} decreasing, "
          f"final < 1e-3, {dt:.1f} s")


@pytest.mark.slow
def test_criterion_07_monte_carlo_theta(mc_run):
    s = mc_run.stats
    assert abs(s.theta_hat - 7 / 8) < 3 * s.theta_se
    for k, target in ((1, F(6, 7)), (2, F(1, 7))):
        p = s.pi_hat.get(k, 0.0)
        se = math.sqrt(float(target) * (1 - float(target)) / s.n_clusters)
        assert abs(p - float(target)) < 3 * se
    ok(7, f"theta_hat = {s.theta_hat:.4f} (3 SE band around 0.875), "
          f"pi_hat(1) = {s.pi_hat.get(1, 0):.4f}, "
          f"pi_hat(2) = {s.pi_hat.get(2, 0):.4f}")


@pytest.mark.slow
def test_criterion_08_evl_zero_exceedance(mc_run, spec_nonper, doubling):
    s = mc_run.stats
    r = oracle_cluster_sets(spec_nonper, doubling, mc_run.u, mc_run.q)
    pred = math.exp(-float(r.theta_n) * s.tau_eff)
    sigma = math.sqrt(max(pred * (1 - pred), pred) / 2000)
    assert abs(s.evl_hat - pred) <= 3 * sigma + 1e-12
    ok(8, f"zero-exceedance fraction {s.evl_hat:.2e} vs prediction "
          f"{pred:.2e} (3 sigma = {3 * sigma:.2e})")


def test_criterion_09_cluster_pattern(spec_pattern, tripling):
    t0 = time.perf_counter()
    with mp.workprec(80):
        for u, check_order in ((mpf("4.619613119957849"), False),
                               (mpf(10), True)):
            x = mpf(1) / 4 + mp.e ** (-u) / 3
            phi_x = evaluate(spec_pattern, x)
            assert abs(phi_x - (u + mp.log(3))) < mpf(2) ** -40
            assert phi_x > u
            fx = iterate(tripling, x, 1)
            phi_fx = evaluate(spec_pattern, fx)
            assert abs(phi_fx - mp.e ** (u / 3)) < mpf(2) ** -40
            if check_order:     # e^{u/3} > u + log 3 holds for large u
                assert phi_fx > phi_x
    res = run_experiment(spec_pattern, tripling,
                         ExperimentPlan(n=2000, orbits=1, seed=20260824,
                                        tau=40.0))
    n_asc = sum(1 for c in res.clusters if c.pattern == ASCENDING_STEP)
    dt = time.perf_counter() - t0
    assert n_asc >= 1
    assert dt < 10
    ok(9, f"phi identities hold; {n_asc} ascending-step clusters in a "
          f"n = 2000 run, {dt:.1f} s")


def test_criterion_10_q_selection(spec_nonper, spec_per, doubling):
    t0 = time.perf_counter()
    assert select_q(spec_nonper, doubling)[0] == 3
    assert select_q(spec_per, doubling)[0] == 5
    single = make_correlated_spec(doubling, F(1, 7) + F(1, 2**30),
                                  [(0, neglog())])
    assert select_q(single, doubling)[0] == 0
    table = return_time_table(spec_nonper, doubling, [10, 100, 1000], q=3)
    rs = [r for _, r in table]
    dt = time.perf_counter() - t0
    assert rs[0] < rs[1] < rs[2]
    assert dt < 30
    ok(10, f"q = 3/5/0; return times {rs} strictly increasing, {dt:.1f} s")


@pytest.mark.slow
def test_criterion_11_uncorrelated(doubling):
    with mp.workprec(80):
        typ1, typ2 = mp.sqrt(2) / 16, mp.sqrt(3) / 8
    spec_typ = make_uncorrelated_spec(doubling, [(typ1, neglog(), 0),
                                                 (typ2, neglog(), 0)])
    plan = ExperimentPlan(n=10**5, orbits=2000, seed=20260824, tau=20.0)
    s1 = run_experiment(spec_typ, doubling, plan, keep_series=False).stats
    assert abs(s1.theta_hat - 1.0) <= 3 * s1.theta_se + 1e-12

    spec_mix = make_uncorrelated_spec(doubling, [(F(0), neglog(), 1),
                                                 (typ1, neglog(), 0)])
    assert analytic_theta(spec_mix, doubling).theta == F(3, 4)
    s2 = run_experiment(spec_mix, doubling, plan, keep_series=False).stats
    assert abs(s2.theta_hat - 0.75) <= 3 * s2.theta_se
    ok(11, f"typical pair theta_hat = {s1.theta_hat:.4f} (target 1); "
           f"fixed point + typical theta_hat = {s2.theta_hat:.4f} "
           f"+- {s2.theta_se:.4f} (target 0.75)")


def test_criterion_12_tail_competition(tripling):
    t0 = time.perf_counter()
    v1, _ = compete([neglog(), powerlaw(F(1, 3))])
    assert (v1.family, v1.index) == (FRECHET, 3)
    v2, _ = compete([boundedlog(1000), boundedpower(1000, 2)])
    assert (v2.family, v2.index) == (WEIBULL, F(1, 2))
    with mp.workprec(120):
        # unbounded pair: ratio law 1-F(2u) / 1-F(u) = 2^-alpha at u = 1e3
        spec = make_uncorrelated_spec(
            tripling, [(F(1, 4), neglog(), 0), (F(3, 4), powerlaw(F(1, 3)), 0)])
        a_hat = -mp.log(exceedance_measure(spec, 2000) /
                        exceedance_measure(spec, 1000)) / mp.log(2)
        assert abs(float(a_hat) - 3) < 0.03
        # bounded pair near the endpoint 1e3: same ratio law in D - u
        spec_b = make_uncorrelated_spec(
            tripling, [(F(1, 4), boundedlog(1000), 0),
                       (F(3, 4), boundedpower(1000, 2), 0)])
        s = mpf("1e-3")
        a_hat_b = -mp.log(exceedance_measure(spec_b, 1000 - s / 2) /
                          exceedance_measure(spec_b, 1000 - s)) / mp.log(2)
        assert abs(float(a_hat_b) - 0.5) < 0.005
    dt = time.perf_counter() - t0
    assert dt < 10
    ok(12, f"Frechet(3) and Weibull(1/2) win; ratio laws give "
           f"{float(a_hat):.4f} and {float(a_hat_b):.4f}, {dt:.1f} s")


@pytest.mark.slow
def test_criterion_13_induced_equivalence():
    f = lsv(0.4)
    spec = make_correlated_spec(f, F(3, 4), [(0, neglog())])
    plan = ExperimentPlan(n=10**5, orbits=500, seed=20260824, tau=20.0, q=1)
    rep = compare_induced_repp(f, F(1, 2), F(1), spec, plan)
    assert abs(rep.theta_orig - rep.theta_induced) < 0.05
    assert rep.tv_pi < 0.05
    ok(13, f"|theta_orig - theta_induced| = "
           f"{abs(rep.theta_orig - rep.theta_induced):.4f}, "
           f"TV(pi_hat) = {rep.tv_pi:.4f}")


def test_criterion_14_property_suites(spec_nonper, tmp_path):
    # interval algebra: 1e4 measure identities, exact to 2^-60
    rng = random.Random(14)
    tol = mpf(2) ** -60
    cases = 0
    with mp.workprec(80):
        while cases < 10**4:
            segs = lambda: [(F(rng.randint(0, 2**30), 2**30),
                             F(rng.randint(0, 2**30), 2**30)
                             + F(rng.randint(1, 2**28), 2**30))
                            for _ in range(rng.randint(0, 3))]
            A, B = ArcSet(segs()), ArcSet(segs())
            assert abs(A.union(B).measure() + A.intersect(B).measure()
                       - A.measure() - B.measure()) < tol
            assert abs(A.difference(B).measure()
                       - (A.measure() - A.intersect(B).measure())) < tol
            assert abs(A.complement().measure() - (1 - A.measure())) < tol
            assert abs(A.symmetric_difference(B).measure()
                       - (A.union(B).measure() - A.intersect(B).measure())) < tol
            cases += 4
    # evaluate vs region membership: 1e4 points across three levels
    with mp.workprec(80):
        hits = 0
        for u in (mpf(8), mpf(12), mpf(18)):
            region = exceedance_region(spec_nonper, u)
            for _ in range(3334):
                x = F(rng.randint(0, 2**40), 2**40)
                assert (evaluate(spec_nonper, x) > u) == region.contains(x)
                hits += 1
        assert hits >= 10**4
    # determinism: byte-identical CLI reruns
    import os
    cfg = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                       "configs", "pattern_3x.toml")
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        r = subprocess.run([sys.executable, "-m", "evtlab.cli", "simulate",
                            cfg, "--out", str(d)], capture_output=True)
        assert r.returncode == 0
        outs.append(b"".join((d / n).read_bytes()
                             for n in ("series.csv", "clusters.csv",
                                       "stats.json")))
    assert outs[0] == outs[1]
    ok(14, "1e4 interval identities, 1e4 evaluate/region checks, "
           "byte-identical reruns")
