"""Barrier-Newton solver for the trajectory subproblem."""

import numpy as np
import pytest

from coguav.barrier import (SmoothConvexProgram, StrictStartError,
                            _assemble, _barrier_value, solve_smooth_convex)

ETA = 1e8
P_MAX = 0.2


def make_program(q_loc, z_loc, w, it_coeff=1e-7, alpha=2.0, fixed_cols=None,
                 v_h=26.0, v_a=6.0, v_d=4.0, h_min=170.0, h_max=220.0,
                 p_max=P_MAX):
    q_loc = np.asarray(q_loc, float)
    z_loc = np.asarray(z_loc, float)
    n = q_loc.shape[0]
    fixed = np.zeros((n, 5), dtype=bool)
    fixed[0, :3] = True
    fixed[-1, :3] = True
    if fixed_cols is not None:
        fixed[:, fixed_cols] = True
    zeta2 = (np.sum(q_loc ** 2, axis=1) + z_loc ** 2) ** (alpha / 2.0)
    return SmoothConvexProgram(
        q_loc=q_loc, z_loc=z_loc, zeta2_loc=zeta2, w=np.asarray(w, float),
        eta_u=ETA, alpha=alpha, p_max=p_max, it_coeff=it_coeff,
        v_h=v_h, v_a=v_a, v_d=v_d, h_min=h_min, h_max=h_max, fixed=fixed)


def strict_start(prog):
    cap = np.minimum(
        prog.it_coeff * (np.min(np.sum(
            (prog.q_loc[:, None] - prog.w[None]) ** 2, axis=2), axis=1)
            + prog.z_loc ** 2) ** (prog.alpha / 2.0),
        prog.p_max)
    x = np.column_stack([prog.q_loc, prog.z_loc,
                         cap * (1 - 1e-7), prog.zeta2_loc * (1 + 1e-7)])
    free_z = ~prog.fixed[:, 2]
    x[free_z, 2] = np.clip(x[free_z, 2], prog.h_min + 1e-7,
                           prog.h_max - 1e-7)
    return x


def random_feasible_program(rng, n=4, k=2):
    # Random short path with comfortable speed slack.
    q0 = rng.uniform(-300, 300, 2)
    heading = rng.uniform(0, 2 * np.pi)
    step = rng.uniform(2.0, 18.0)
    q_loc = q0 + np.outer(np.arange(n) * step,
                          [np.cos(heading), np.sin(heading)])
    q_loc += rng.uniform(-2, 2, (n, 2))
    z_loc = np.clip(175.0 + np.cumsum(rng.uniform(-2.5, 2.5, n)), 172, 216)
    w = rng.uniform(-400, 400, (k, 2))
    it_coeff = 10 ** rng.uniform(-8, -5)
    return make_program(q_loc, z_loc, w, it_coeff=it_coeff)


def test_all_slots_fixed_returns_start():
    # Two boundary slots only: the zeta variables are already optimal at the
    # strictified start, so the solve returns it (within tolerance).
    prog = make_program([[0.0, 0.0], [10.0, 0.0]], [170.0, 170.0],
                        [[5000.0, 0.0]], it_coeff=1e-2)
    x0 = strict_start(prog)
    sol = solve_smooth_convex(prog, x0)
    assert not sol.degraded
    assert sol.objective >= prog.objective(x0)
    assert sol.objective == pytest.approx(prog.objective(x0), abs=1e-5)
    assert np.allclose(sol.x[:, :3], x0[:, :3])  # fixed block untouched


def test_single_free_slot_matches_grid():
    # One free middle slot, IT far away, P binding: the optimum puts zeta1 at
    # P and zeta2 at the composite of the best reachable (q, z).
    q_loc = np.array([[-30.0, 0.0], [-10.0, 0.0], [10.0, 0.0]])
    z_loc = np.array([172.0, 174.0, 171.0])
    prog = make_program(q_loc, z_loc, [[5000.0, 0.0]], it_coeff=1e-2,
                        p_max=0.1)
    x0 = strict_start(prog)
    sol = solve_smooth_convex(prog, x0)
    assert not sol.degraded

    # Dense grid oracle over the feasible middle slot.
    def rlb(zeta1, zeta2, j):
        return (np.log2(zeta2 + ETA * zeta1) - np.log2(prog.zeta2_loc[j])
                - (zeta2 - prog.zeta2_loc[j]) * np.log2(np.e)
                / prog.zeta2_loc[j])

    const = rlb(0.1, prog.zeta2_loc[0], 0) + rlb(0.1, prog.zeta2_loc[2], 2)
    best, arg = -np.inf, None
    for z in np.linspace(170.0 + 1e-9, 178.0, 80):
        if z - z_loc[0] > 6.0 or z_loc[0] - z > 4.0:
            continue
        if z_loc[2] - z > 6.0 or z - z_loc[2] > 4.0:
            continue
        for x_ in np.linspace(-36, 16, 160):
            for y_ in np.linspace(-26, 26, 160):
                if (x_ - q_loc[0, 0]) ** 2 + (y_ - q_loc[0, 1]) ** 2 > 26 ** 2:
                    continue
                if (x_ - q_loc[2, 0]) ** 2 + (y_ - q_loc[2, 1]) ** 2 > 26 ** 2:
                    continue
                comp = (x_ ** 2 + y_ ** 2 + z * z)
                val = (const + rlb(0.1, comp, 1)) / 3.0
                if val > best:
                    best, arg = val, (x_, y_, z)
    assert sol.objective >= best - 1e-6
    assert sol.objective <= best + 5e-4  # grid resolution slack
    assert sol.x[1, 3] == pytest.approx(0.1, rel=1e-5)
    comp1 = sol.x[1, 0] ** 2 + sol.x[1, 1] ** 2 + sol.x[1, 2] ** 2
    assert sol.x[1, 4] == pytest.approx(comp1, rel=1e-3)
    assert np.hypot(sol.x[1, 0] - arg[0], sol.x[1, 1] - arg[1]) < 1.0


def test_ascent_on_randomized_instances():
    rng = np.random.default_rng(11)
    for _ in range(100):
        prog = random_feasible_program(rng)
        x0 = strict_start(prog)
        sol = solve_smooth_convex(prog, x0)
        assert sol.objective >= prog.objective(x0) - 1e-12


def test_banded_and_dense_agree():
    rng = np.random.default_rng(5)
    for n in (3, 8, 14, 20):
        prog = random_feasible_program(rng, n=n, k=3)
        x0 = strict_start(prog)
        a = solve_smooth_convex(prog, x0, linsolve="banded")
        b = solve_smooth_convex(prog, x0, linsolve="dense")
        assert abs(a.objective - b.objective) < 1e-8 * (1 + abs(a.objective))


def test_barrier_floor_insensitivity():
    rng = np.random.default_rng(9)
    prog = random_feasible_program(rng, n=6)
    x0 = strict_start(prog)
    a = solve_smooth_convex(prog, x0, tol=1e-12, mu_min=1e-11)
    b = solve_smooth_convex(prog, x0, tol=1e-12, mu_min=5e-12)
    assert abs(a.objective - b.objective) < 1e-6 * (1 + abs(a.objective))


def test_strict_start_required():
    prog = make_program([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]],
                        [170.0, 170.0, 170.0], [[400.0, 0.0]])
    x0 = strict_start(prog)
    x0[1, 2] = 170.0  # exactly on the altitude floor
    with pytest.raises(StrictStartError):
        solve_smooth_convex(prog, x0)


def test_kkt_residual_small():
    rng = np.random.default_rng(21)
    prog = random_feasible_program(rng, n=5)
    sol = solve_smooth_convex(prog, strict_start(prog), tol=1e-7)
    assert sol.kkt_residual <= 1e-6


@pytest.mark.parametrize("alpha", [2.0, 2.6, 3.4])
def test_gradient_hessian_match_finite_differences(alpha):
    # Central-difference check of the assembled barrier derivatives (covers
    # the power-composite term, the rate log term and every barrier piece).
    rng = np.random.default_rng(int(alpha * 10))
    mu = 0.37
    for _ in range(12):
        prog = random_feasible_program(rng, n=3, k=2)
        prog = make_program(prog.q_loc, prog.z_loc, prog.w, it_coeff=1e-6,
                            alpha=alpha)
        x = strict_start(prog)
        cap = np.minimum(np.min(prog.it_const, axis=1), prog.p_max)
        x[:, 3] = 0.4 * cap                 # comfortably interior
        x[:, 4] = prog.zeta2_loc * 1.3
        g, diag, low = _assemble(prog, x, mu)
        free = ~prog.fixed
        scale = np.maximum(np.abs(x), 1.0)
        for n_idx in range(prog.n_slots):
            for v_idx in range(5):
                if not free[n_idx, v_idx]:
                    continue
                h = 2.5e-7 * max(scale[n_idx, v_idx], 1.0)
                xp = x.copy(); xp[n_idx, v_idx] += h
                xm = x.copy(); xm[n_idx, v_idx] -= h
                fd = (_barrier_value(prog, xp, mu)
                      - _barrier_value(prog, xm, mu)) / (2 * h)
                assert g[n_idx, v_idx] == pytest.approx(
                    fd, rel=1e-5, abs=1e-9 * (1 + abs(fd)))
                # Hessian column via gradient differences.
                gp = _assemble(prog, xp, mu)[0]
                gm = _assemble(prog, xm, mu)[0]
                fd_col = (gp - gm) / (2 * h)
                hess_col = np.zeros_like(fd_col)
                hess_col[n_idx] = diag[n_idx, :, v_idx]
                if n_idx > 0:
                    hess_col[n_idx - 1] = low[n_idx - 1, v_idx, :]
                if n_idx < prog.n_slots - 1:
                    hess_col[n_idx + 1] = low[n_idx, :, v_idx]
                mask = np.abs(fd_col) > 1e-8 * (1 + np.abs(hess_col))
                assert np.allclose(hess_col[mask], fd_col[mask], rtol=2e-4), \
                    f"hessian mismatch at slot {n_idx} var {v_idx}"
