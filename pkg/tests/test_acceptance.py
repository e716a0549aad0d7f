"""Acceptance gate: twelve numbered end-to-end criteria.

Each criterion is one test that prints a single PASS/FAIL line with the
measured numbers (visible with ``pytest -s``; pytest -v additionally
shows one PASSED/FAILED row per criterion) and then asserts at the
stated tolerance.  Module-scoped fixtures share the expensive profile
solves between criteria; the runtime budget of each criterion is
checked against its own test body.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from semifront.asymptotics import detect_oscillation, fit_decay
from semifront.chareq import (
    chi_dz,
    count_zeros_rect,
    critical_speed,
    critical_speed_bisection,
    critical_speed_newton,
    dominance_check,
    eval_chi,
    real_roots,
)
from semifront.evolution import front_speed, moving_frame_gap, tail_seed
from semifront.kernel import make_kernel
from semifront.model import (
    builtin_kpp,
    builtin_may,
    builtin_nicholson,
    builtin_square,
)
from semifront.profile import SolverOptions, solve_profile
from semifront.verify import diagnostics_Q, uniqueness_harness, verify_model

from oracles import kpp_front_no_delay


def report(num: int, ok: bool, elapsed: float, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {status} ({elapsed:.1f}s) {detail}", flush=True)
    assert ok, f"criterion {num:02d}: {detail}"


# ------------------------------------------------------ shared solves


@pytest.fixture(scope="module")
def kpp_h0_sol():
    return solve_profile(builtin_kpp(0.0), 2.5)


@pytest.fixture(scope="module")
def kpp_h01_sol():
    return solve_profile(builtin_kpp(0.1), 2.5)


@pytest.fixture(scope="module")
def kpp_h05_sol():
    return solve_profile(builtin_kpp(0.5), 2.5)


@pytest.fixture(scope="module")
def kpp_h1_sol():
    return solve_profile(builtin_kpp(1.0), 2.5)


@pytest.fixture(scope="module")
def kpp_h2_sol():
    return solve_profile(builtin_kpp(2.0), 2.5)


@pytest.fixture(scope="module")
def kpp_crit_sol():
    return solve_profile(builtin_kpp(1.0), 2.0)


# ----------------------------------------------------------- criteria


def test_criterion_01_kpp_critical_speed():
    t0 = time.perf_counter()
    devs = {h: abs(critical_speed(builtin_kpp(h))[0] - 2.0) for h in (0.0, 0.5, 1.0, 2.0)}
    worst = max(devs.values())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    report(1, ok, elapsed, f"kpp c* = 2 within 1e-10 for h in {{0, 0.5, 1, 2}} (worst dev {worst:.2e})")


def test_criterion_02_root_table_and_dominance():
    t0 = time.perf_counter()
    m = builtin_kpp(1.0)
    rr = real_roots(m, 2.5)
    dev = max(abs(rr.lambda1 - 0.5), abs(rr.lambda2 - 2.0))
    dom = dominance_check(m, 2.5)
    elapsed = time.perf_counter() - t0
    ok = dev <= 1e-10 and dom and elapsed < 1.0
    report(2, ok, elapsed,
           f"kpp c=2.5 roots (0.5, 2.0) within 1e-10 (dev {dev:.2e}), dominance {dom}")


def test_criterion_03_double_root_dual_oracles():
    t0 = time.perf_counter()
    m = builtin_nicholson(1.0, 2.0)
    c_newton, lam_newton, _, _ = critical_speed_newton(m)
    c_bis, _ = critical_speed_bisection(m)
    gap = abs(c_newton - c_bis)
    chi = abs(eval_chi(m, lam_newton, c_newton))
    chi_z = abs(chi_dz(m, lam_newton, c_newton))
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-8 and chi <= 1e-9 and chi_z <= 1e-9 and elapsed < 5.0
    report(3, ok, elapsed,
           f"nicholson c* newton/bisection gap {gap:.2e} <= 1e-8; "
           f"|chi| {chi:.2e}, |chi_z| {chi_z:.2e} <= 1e-9")


def test_criterion_04_zero_count_on_rectangles():
    t0 = time.perf_counter()
    counts = {}
    kpp = builtin_kpp(1.0)
    rr = real_roots(kpp, 2.5)
    counts["kpp"] = count_zeros_rect(kpp, 2.5, (rr.lambda1 - 1e-3, rr.lambda2 + 1e-3), 50.0)
    nich = builtin_nicholson(1.0, 2.0)
    c = critical_speed(nich)[0] + 0.5
    rr = real_roots(nich, c)
    counts["nicholson"] = count_zeros_rect(nich, c, (rr.lambda1 - 1e-3, rr.lambda2 + 1e-3), 50.0)
    elapsed = time.perf_counter() - t0
    ok = counts["kpp"] == 2 and counts["nicholson"] == 2 and elapsed < 30.0
    report(4, ok, elapsed, f"zero count == 2 on both rectangles (got {counts})")


def test_criterion_05_kernel_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_mass = worst_jump = 0.0
    eps = 2e-6
    for c, q in zip(rng.uniform(0.1, 6.0, 100), rng.uniform(0.0, 4.0, 100)):
        k = make_kernel(c, q)
        total = quad(k, -np.inf, 0.0)[0] + quad(k, 0.0, np.inf)[0]
        worst_mass = max(worst_mass, abs(total - 1.0 / (1.0 + q)))
        left = (3 * k(0.0) - 4 * k(-eps) + k(-2 * eps)) / (2 * eps)
        right = (-3 * k(0.0) + 4 * k(eps) - k(2 * eps)) / (2 * eps)
        worst_jump = max(worst_jump, abs(left - right - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_mass <= 1e-10 and worst_jump <= 1e-8 and elapsed < 1.0
    report(5, ok, elapsed,
           f"100 random (c,q): mass dev {worst_mass:.2e} <= 1e-10, "
           f"jump dev {worst_jump:.2e} <= 1e-8")


def test_criterion_06_profile_vs_shooting_oracle(kpp_h0_sol):
    t0 = time.perf_counter()
    reference = kpp_front_no_delay(2.5, kpp_h0_sol.t)
    sup = float(np.max(np.abs(reference - kpp_h0_sol.phi)))
    elapsed = time.perf_counter() - t0
    ok = kpp_h0_sol.converged and sup <= 1e-4 and elapsed < 60.0
    report(6, ok, elapsed, f"kpp h=0 c=2.5 vs shooting oracle: sup {sup:.2e} <= 1e-4")


def test_criterion_07_tail_decay_law(kpp_h05_sol, kpp_h1_sol, kpp_crit_sol):
    t0 = time.perf_counter()
    rates = {0.5: fit_decay(kpp_h05_sol).rate, 1.0: fit_decay(kpp_h1_sol).rate}
    rel = max(abs(r - 0.5) / 0.5 for r in rates.values())
    crit_fit = fit_decay(kpp_crit_sol)
    fires = crit_fit.mode == "critical_t_times_exponential"
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.02 and fires and elapsed < 120.0
    report(7, ok, elapsed,
           f"kpp c=2.5 rates {rates[0.5]:.4f}, {rates[1.0]:.4f} within 2% of 0.5; "
           f"critical classifier at c=2: {crit_fit.mode}")


def test_criterion_08_oscillation_regimes(kpp_h2_sol, kpp_h01_sol):
    t0 = time.perf_counter()
    osc2, crossings2 = detect_oscillation(kpp_h2_sol)
    osc01, crossings01 = detect_oscillation(kpp_h01_sol)
    monotone = bool(np.min(kpp_h01_sol.dphi) >= -1e-6)
    elapsed = time.perf_counter() - t0
    ok = (osc2 and crossings2 >= 2 and not osc01 and crossings01 == 0
          and monotone and elapsed < 120.0)
    report(8, ok, elapsed,
           f"kpp h=2: oscillatory with {crossings2} kappa crossings (need >= 2); "
           f"h=0.1 monotone: {monotone}")


def test_criterion_09_uniqueness_across_seeds():
    t0 = time.perf_counter()
    runs = {}
    nich = builtin_nicholson(1.0, 2.0)
    cases = [("kpp", builtin_kpp(2.0), 2.5), ("nich", nich, critical_speed(nich)[0] + 0.5)]
    for label, m, c in cases:
        for tol in (1e-8, 1e-9):
            opts = SolverOptions(tol=tol, accel_iter=3000, t_plus=120.0)
            pairs = uniqueness_harness(m, c, 5, opts=opts)
            # 10 aligned pairs <=> all five seeds converged
            runs[label, tol] = (len(pairs), max(d for _, d in pairs))
    elapsed = time.perf_counter() - t0
    all_conv = all(n == 10 for n, _ in runs.values())
    base_ok = runs["kpp", 1e-8][1] <= 1e-3 and runs["nich", 1e-8][1] <= 1e-3
    shrink = (runs["kpp", 1e-9][1] < runs["kpp", 1e-8][1]
              and runs["nich", 1e-9][1] < runs["nich", 1e-8][1])
    ok = all_conv and base_ok and shrink and elapsed < 600.0
    report(9, ok, elapsed,
           f"5 seeds converge; max pair distance <= 1e-3 "
           f"(kpp {runs['kpp', 1e-8][1]:.2e}, nich {runs['nich', 1e-8][1]:.2e}); "
           f"shrinks at tol/10 (kpp {runs['kpp', 1e-9][1]:.2e}, nich {runs['nich', 1e-9][1]:.2e})")


def test_criterion_10_profile_diagnostics(
    kpp_h0_sol, kpp_h01_sol, kpp_h05_sol, kpp_h1_sol, kpp_h2_sol, kpp_crit_sol
):
    t0 = time.perf_counter()
    sols = [kpp_h0_sol, kpp_h01_sol, kpp_h05_sol, kpp_h1_sol, kpp_h2_sol, kpp_crit_sol]
    q_worst, pi_least = math.inf, math.inf
    for sol in sols:
        assert sol.converged
        q_min, pi = diagnostics_Q(sol)
        q_worst, pi_least = min(q_worst, q_min), min(pi_least, pi)
    elapsed = time.perf_counter() - t0
    # every bundled run was solved at the default tol 1e-9
    ok = q_worst >= -1e-8 and pi_least > 0.0
    report(10, ok, elapsed,
           f"all {len(sols)} converged runs: Q_min {q_worst:.2e} >= -1e-8, "
           f"pi integral >= {pi_least:.3f} > 0")


def test_criterion_11_hypothesis_suite():
    t0 = time.perf_counter()
    passing = {
        "kpp": verify_model(builtin_kpp(1.0), n_samples=10_000),
        "nicholson": verify_model(builtin_nicholson(1.0, 2.0), n_samples=10_000),
        "may": verify_model(builtin_may(1.0, 2.0, 2.0, 1.0), n_samples=10_000),
    }
    square = verify_model(builtin_square(), n_samples=10_000)
    ub = square.hypotheses["UB"]
    elapsed = time.perf_counter() - t0
    ok = (all(r.all_passed for r in passing.values())
          and not square.all_passed and not ub.passed
          and ub.counterexample is not None and elapsed < 60.0)
    report(11, ok, elapsed,
           f"kpp/nicholson/may all pass at 1e4 samples "
           f"({', '.join(k for k, r in passing.items() if r.all_passed)}); "
           f"square fails UB with counterexample: {ub.counterexample is not None}")


def test_criterion_12_evolution_cross_check(kpp_h1_sol):
    t0 = time.perf_counter()
    m = builtin_kpp(1.0)
    lam1 = real_roots(m, 2.5).lambda1
    run = front_speed(m, tail_seed(m.kappa, lam1), -80.0, 30.0, 0.1, 18.0)
    rel = abs(run.speed - 2.5) / 2.5
    _, gap = moving_frame_gap(run, kpp_h1_sol)
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.02 and gap <= 5e-2 and elapsed < 300.0
    report(12, ok, elapsed,
           f"kpp h=1 measured speed {run.speed:.4f} (rel err {rel:.2%} <= 2%); "
           f"moving-frame sup gap {gap:.2e} <= 5e-2")
