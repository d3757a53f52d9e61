"""Acceptance gate: every criterion printed as one PASS line with its
measured value, asserted at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see the summary lines.
"""

import time

import numpy as np
import pytest

from coguav import (PlanOptions, Scenario, dbm_to_watts, grid_oracle,
                    initial_trajectory, min_duration, plan, run_benchmark,
                    sca_optimize, solve_placement, solve_single_pr)
from coguav.barrier import _assemble, _barrier_value, solve_smooth_convex
from coguav.experiments import TEN_PR_LAYOUT, crossing_mission, default_scenario

from test_barrier import random_feasible_program, strict_start
from test_placement import lipschitz_slack


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion} PASS: {detail}")


def test_criterion_1_benchmark_gap_reproduction():
    """Proposed beats power-only by ~20% and placement-only by ~40% at
    Gamma=-80 dBm, P=23 dBm, K=1, w1=(100,0).  Runtime < 1 s."""
    s = default_scenario()
    t0 = time.perf_counter()
    proposed = run_benchmark("proposed-static", s)["rate_bpshz"]
    power = run_benchmark("power-only", s)["rate_bpshz"]
    place = run_benchmark("placement-only", s)["rate_bpshz"]
    elapsed = time.perf_counter() - t0
    gain_power = (proposed / power - 1.0) * 100.0
    gain_place = (proposed / place - 1.0) * 100.0
    assert 17.0 <= gain_power <= 23.0
    assert 35.0 <= gain_place <= 45.0
    assert elapsed < 1.0
    report(1, f"+{gain_power:.1f}% vs power-only (20 +/- 3), "
              f"+{gain_place:.1f}% vs placement-only (40 +/- 5), "
              f"{elapsed:.2f} s")


def test_criterion_2_closed_form_vs_sdr():
    """50 seeded random K=1 instances: closed form and SDR agree to 0.5%.
    Runtime < 30 s."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        wn = rng.uniform(20.0, 500.0)
        ang = rng.uniform(0, 2 * np.pi)
        s = Scenario(pr_locations=[[wn * np.cos(ang), wn * np.sin(ang)]],
                     beta_u=1e-3, beta_0=1e-3, sigma2=1e-11, alpha=2.0,
                     gamma_it=dbm_to_watts(rng.uniform(-90, -60)),
                     p_max=dbm_to_watts(rng.uniform(0, 23)),
                     h_min=170.0, h_max=220.0)
        cf = solve_single_pr(s)
        sdr = solve_placement(s)
        worst = max(worst, abs(cf.rate - sdr.rate) / max(cf.rate, 1e-12))
    elapsed = time.perf_counter() - t0
    assert worst <= 5e-3
    assert elapsed < 30.0
    report(2, f"worst relative rate gap {worst:.2e} (<= 0.5%), "
              f"{elapsed:.1f} s")


def test_criterion_3_grid_oracle_sandwich():
    """10 seeded K<=3 scenarios: the 5 m grid oracle rate brackets the SDR
    rate (above minus a Lipschitz slack, below within 2%).  Runtime < 2 min."""
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    worst_low, worst_high = 0.0, -np.inf
    for _ in range(10):
        k = int(rng.integers(1, 4))
        s = default_scenario(prs=rng.uniform(-250, 250, (k, 2)),
                           gamma_dbm=float(rng.uniform(-82, -75)),
                           p_max_dbm=float(rng.uniform(10, 23)))
        sdr = solve_placement(s)
        assert np.max(np.abs(sdr.pos.q)) < 500.0  # optimum inside the box
        _, _, grid_rate = grid_oracle(s, (-600, 600, -600, 600), 5.0)
        assert grid_rate <= sdr.rate + lipschitz_slack(s, 5.0)
        assert grid_rate >= sdr.rate * (1.0 - 0.02)
        worst_low = max(worst_low, 1.0 - grid_rate / sdr.rate)
        worst_high = max(worst_high, grid_rate - sdr.rate)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    report(3, f"grid within -{worst_low * 100:.2f}% / +{max(worst_high, 0):.1e}"
              f" bps/Hz of SDR over 10 scenarios, {elapsed:.1f} s")


def test_criterion_4_minimum_duration():
    """The mobile mission profile yields T_min of about 107 s."""
    t_min = min_duration(crossing_mission(200.0))
    assert 106.5 <= t_min <= 108.0
    report(4, f"T_min = {t_min:.2f} s in [106.5, 108]")


def test_criterion_5_scheme_coincidence():
    """With a loose IT cap (Gamma >= -53 dBm) all three static schemes agree
    within 1%.  Runtime < 5 s."""
    t0 = time.perf_counter()
    worst = 0.0
    for gamma in (-53.0, -50.0, -47.0, -45.0):
        s = default_scenario(gamma_dbm=gamma)
        rates = [run_benchmark(sch, s)["rate_bpshz"]
                 for sch in ("proposed-static", "power-only",
                             "placement-only")]
        spread = (max(rates) - min(rates)) / max(rates)
        worst = max(worst, spread)
        assert spread <= 0.01, f"spread {spread:.3%} at Gamma={gamma}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report(5, f"max scheme spread {worst:.3%} (<= 1%) over Gamma >= -53 dBm, "
              f"{elapsed:.1f} s")


def test_criterion_6_sca_behavior_suite():
    """SCA on the K=10 layout at N=200: monotone feasible iterations; a
    loose cap keeps the FHF profile (z at h_min, full power) and a tight cap
    raises altitude and cuts power near the PRs."""
    m = crossing_mission(200.0, n_slots=200)

    # (c) Gamma=-50 dBm, P=20 dBm: effectively unconstrained
    s_loose = default_scenario(prs=TEN_PR_LAYOUT, gamma_dbm=-50.0,
                             p_max_dbm=20.0)
    traj_c, state_c = plan(s_loose, m)
    assert np.max(traj_c.z) - s_loose.h_min <= 1.0
    frac_full = float(np.mean(traj_c.p >= s_loose.p_max * (1 - 1e-9)))
    assert frac_full >= 0.99

    # (d) Gamma=-70 dBm, P=23 dBm: altitude-raising / power-dipping
    s_tight = default_scenario(prs=TEN_PR_LAYOUT, gamma_dbm=-70.0,
                             p_max_dbm=23.0)
    traj_d, state_d = plan(s_tight, m)
    assert np.max(traj_d.z) > s_tight.h_min + 5.0
    assert np.min(traj_d.p) < s_tight.p_max

    # (a) monotone histories, (b) every iterate feasible within 1e-6
    for state in (state_c, state_d):
        h = state.objective_history
        assert all(b >= a - 1e-9 for a, b in zip(h, h[1:]))
        for sub in state.subproblems:
            assert sub["iterate_violations"] == []
    report(6, f"loose cap: max dz={np.max(traj_c.z) - 170:.4f} m, "
              f"full-power fraction {frac_full:.3f}; tight cap: "
              f"max dz={np.max(traj_d.z) - 170:.1f} m, "
              f"min p={np.min(traj_d.p):.4f} W < P; histories monotone, "
              f"all iterates feasible")


def test_criterion_7_dominance_ladder():
    """Proposed mobile design dominates power-on-initial-trajectory exactly
    and the 2D variant when warm-started from it; average rate grows with
    the mission duration."""
    rng = np.random.default_rng(555)
    opts = PlanOptions()
    for trial in range(5):
        k = int(rng.integers(2, 5))
        s = default_scenario(prs=rng.uniform(-400, 400, (k, 2)),
                           gamma_dbm=float(rng.uniform(-80, -72)))
        q_i = rng.uniform(-700, -300, 2)
        q_f = rng.uniform(300, 700, 2)
        dist = np.linalg.norm(q_f - q_i)
        m = crossing_mission(float(dist / 26.0 * rng.uniform(1.4, 2.0)))
        m = type(m)(q_initial=q_i, q_final=q_f, z_initial=170.0,
                    z_final=170.0, v_h=26.0, v_a=6.0, v_d=4.0,
                    duration_t=m.duration_t,
                    n_slots=max(2, int(np.ceil(m.duration_t))))
        init = initial_trajectory(s, m)
        mobile, _ = sca_optimize(s, m, init, opts)
        assert mobile.avg_rate >= init.avg_rate - 1e-9
        flat, _ = plan(s, m, PlanOptions(optimize_altitude=False))
        warm3d, _ = sca_optimize(s, m, flat, opts)
        assert warm3d.avg_rate >= flat.avg_rate - 1e-9

    s = default_scenario(prs=TEN_PR_LAYOUT, gamma_dbm=-80.0, p_max_dbm=23.0)
    rates = []
    for t_total in (120.0, 160.0, 200.0, 300.0):
        traj, _ = plan(s, crossing_mission(t_total))
        rates.append(traj.avg_rate)
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
    report(7, "ascent ladder held on 5 seeded missions; avg rate over "
              f"T=120/160/200/300 s: {', '.join(f'{r:.3f}' for r in rates)}")


def test_criterion_8_numerical_kernels():
    """Derivatives match finite differences to 1e-5 on 1000 random points;
    banded and dense Newton agree to 1e-8 for N <= 20; the relaxation stays
    rank-one on 100 same-side layouts."""
    # (a) central-difference check of the assembled barrier derivatives
    rng = np.random.default_rng(4096)
    mu = 0.21
    checked = 0
    hess_checked = 0
    while checked < 1000:
        prog = random_feasible_program(rng, n=3, k=2)
        x = strict_start(prog)
        cap = np.minimum(np.min(prog.it_const, axis=1), prog.p_max)
        x[:, 3] = rng.uniform(0.2, 0.6) * cap
        x[:, 4] = prog.zeta2_loc * rng.uniform(1.1, 1.6)
        g, diag, low = _assemble(prog, x, mu)
        free = np.argwhere(~prog.fixed)
        for n_idx, v_idx in free[rng.permutation(len(free))[:12]]:
            h = 2.5e-7 * max(abs(x[n_idx, v_idx]), 1.0)
            xp = x.copy(); xp[n_idx, v_idx] += h
            xm = x.copy(); xm[n_idx, v_idx] -= h
            fd = (_barrier_value(prog, xp, mu)
                  - _barrier_value(prog, xm, mu)) / (2 * h)
            assert g[n_idx, v_idx] == pytest.approx(fd, rel=1e-5,
                                                    abs=1e-9 * (1 + abs(fd)))
            checked += 1
            if hess_checked < 200:
                gp = _assemble(prog, xp, mu)[0]
                gm = _assemble(prog, xm, mu)[0]
                fd_col = (gp - gm) / (2 * h)
                col = np.zeros_like(fd_col)
                col[n_idx] = diag[n_idx, :, v_idx]
                if n_idx > 0:
                    col[n_idx - 1] = low[n_idx - 1, v_idx, :]
                if n_idx < prog.n_slots - 1:
                    col[n_idx + 1] = low[n_idx, :, v_idx]
                mask = np.abs(fd_col) > 1e-8 * (1 + np.abs(col))
                assert np.allclose(col[mask], fd_col[mask], rtol=2e-4)
                hess_checked += 1

    # (b) banded vs dense Newton path agreement on N <= 20
    worst_gap = 0.0
    for n in (4, 9, 14, 20):
        prog = random_feasible_program(rng, n=n, k=3)
        x0 = strict_start(prog)
        banded = solve_smooth_convex(prog, x0, linsolve="banded")
        dense = solve_smooth_convex(prog, x0, linsolve="dense")
        gap = abs(banded.objective - dense.objective)
        worst_gap = max(worst_gap, gap)
        assert gap < 1e-8 * (1 + abs(banded.objective))

    # (c) rank-one relaxation outcomes for same-side PR layouts
    worst_ratio = 0.0
    side = 0
    for _ in range(100):
        k = int(rng.integers(2, 6))
        spread = rng.uniform(40, 400, k)
        other = rng.uniform(-300, 300, k)
        if side == 0:
            prs = np.column_stack([spread, other])       # x_k >= 0
        elif side == 1:
            prs = np.column_stack([-spread, other])      # x_k <= 0
        elif side == 2:
            prs = np.column_stack([other, spread])       # y_k >= 0
        else:
            prs = np.column_stack([other, -spread])      # y_k <= 0
        side = (side + 1) % 4
        s = default_scenario(prs=prs, gamma_dbm=float(rng.uniform(-85, -72)),
                           p_max_dbm=float(rng.uniform(12, 23)))
        sol = solve_placement(s)
        if sol.diagnostics.get("bisection_iterations", 0) > 0:
            ratio = sol.diagnostics["rank_ratio"]
            worst_ratio = max(worst_ratio, ratio)
            assert ratio < 1e-5
    report(8, f"{checked} derivative points within 1e-5 "
              f"({hess_checked} Hessian columns); banded-dense gap "
              f"{worst_gap:.1e} (<= 1e-8); worst rank ratio "
              f"{worst_ratio:.1e} (< 1e-5) over 100 same-side layouts")
