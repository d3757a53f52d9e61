"""Mobile-scenario joint 3D trajectory and transmit-power optimization.

The per-slot transmit power has a closed-form optimum for any trajectory
(full power, capped by the tightest IT constraint), so the problem reduces
to the path variables.  Those are optimized by successive convex
approximation: each iteration linearizes the non-convex pieces at the
current trajectory and solves the resulting concave subproblem with the
barrier kernel in :mod:`coguav.barrier`.  The initial trajectory follows a
fly-hover-fly profile through the quasi-stationary optimum when the mission
leaves time for it, and a constant-speed straight flight otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .barrier import SmoothConvexProgram, StrictStartError, solve_smooth_convex
from .placement import PlacementSolution, solve_placement
from .scenario import (MissionProfile, Scenario, power_cap, pr_distance2,
                       rate_profile, watts_to_dbm)

EPS_SCA = 1e-4
J_MAX = 50
SPEED_MARGIN = 1e-5   # initializers fly at (1 - margin) * limit for strictness
Z_LIFT = 1e-6         # interior-slot altitude lift off the h_min face, meters


class InfeasibleMissionError(ValueError):
    """Mission duration too short to connect the endpoints."""

    def __init__(self, t_min: float, message: str):
        super().__init__(message)
        self.t_min = t_min


@dataclass
class PlanOptions:
    eps_sca: float = EPS_SCA
    j_max: int = J_MAX
    optimize_altitude: bool = True
    eps_bis: float = 1e-6
    eps_feas: float = 1e-8
    rank_tol: float = 1e-4
    seed: int = 0
    barrier_tol: float = 1e-7
    linsolve: str = "banded"
    backend: str | None = None


@dataclass
class ScaState:
    """Iteration log of one SCA run."""

    iterations: int = 0
    objective_history: list = field(default_factory=list)
    converged: bool = False
    degraded: bool = False
    notes: list = field(default_factory=list)
    subproblems: list = field(default_factory=list)


@dataclass
class Trajectory:
    """Discretized mission: per-slot positions, powers, rates and margins."""

    q: np.ndarray             # (N, 2) m
    z: np.ndarray             # (N,) m
    p: np.ndarray             # (N,) W
    rate: np.ndarray          # (N,) bps/Hz
    it_margin_db: np.ndarray  # (N,) worst-PR margin, +inf when p = 0
    nearest_pr: np.ndarray    # (N,) 0-based PR index
    avg_rate: float
    duration_t: float
    dt: float

    @property
    def n_slots(self) -> int:
        return self.q.shape[0]

    @classmethod
    def from_path(cls, s: Scenario, m: MissionProfile, q: np.ndarray,
                  z: np.ndarray) -> "Trajectory":
        q = np.asarray(q, dtype=float)
        z = np.asarray(z, dtype=float)
        p = optimal_power_profile(s, q, z)
        rate = rate_profile(s, q, z, p)
        d2 = pr_distance2(s, q, z)
        worst = np.max(s.beta_0 * p[:, None] * d2 ** (-s.alpha / 2.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            margin = np.where(worst > 0.0,
                              10.0 * np.log10(s.gamma_it / worst), np.inf)
        return cls(q=q, z=z, p=p, rate=rate, it_margin_db=margin,
                   nearest_pr=np.argmin(d2, axis=1),
                   avg_rate=float(np.mean(rate)),
                   duration_t=m.duration_t, dt=m.dt)

    def violations(self, s: Scenario, m: MissionProfile,
                   tol: float = 1e-6) -> list[str]:
        """Constraint violations beyond the tolerance; empty when feasible."""
        out = []
        vh, va, vd = m.v_h * m.dt, m.v_a * m.dt, m.v_d * m.dt
        steps = np.linalg.norm(np.diff(self.q, axis=0), axis=1)
        if np.any(steps > vh * (1.0 + tol)):
            out.append(f"horizontal speed exceeded: {steps.max():.6f} > {vh:.6f}")
        dz = np.diff(self.z)
        if np.any(dz > va * (1.0 + tol)) or np.any(-dz > vd * (1.0 + tol)):
            out.append("vertical speed exceeded")
        if (np.linalg.norm(self.q[0] - m.q_initial) > tol * (1 + vh)
                or np.linalg.norm(self.q[-1] - m.q_final) > tol * (1 + vh)
                or abs(self.z[0] - m.z_initial) > tol * (1 + va)
                or abs(self.z[-1] - m.z_final) > tol * (1 + va)):
            out.append("boundary conditions violated")
        if (np.any(self.z < s.h_min * (1.0 - tol) - tol)
                or np.any(self.z > s.h_max * (1.0 + tol))):
            out.append("altitude box violated")
        if np.any(self.p < -tol) or np.any(self.p > s.p_max * (1.0 + tol)):
            out.append("power box violated")
        d2 = pr_distance2(s, self.q, self.z)
        worst = np.max(s.beta_0 * self.p[:, None] * d2 ** (-s.alpha / 2.0),
                       axis=1)
        if np.any(worst > s.gamma_it * (1.0 + tol)):
            out.append("IT constraint violated")
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "t_s", "x_m", "y_m", "z_m", "p_dbm",
                             "rate_bpshz", "worst_it_margin_db", "nearest_pr"])
            for n in range(self.n_slots):
                writer.writerow([
                    n + 1,
                    f"{n * self.dt:.10g}",
                    f"{self.q[n, 0]:.10g}",
                    f"{self.q[n, 1]:.10g}",
                    f"{self.z[n]:.10g}",
                    f"{watts_to_dbm(self.p[n]):.10g}",
                    f"{self.rate[n]:.10g}",
                    f"{self.it_margin_db[n]:.10g}",
                    int(self.nearest_pr[n]),
                ])

    def record(self, state: ScaState | None = None) -> dict:
        rec = {
            "avg_rate_bpshz": self.avg_rate,
            "duration_s": self.duration_t,
            "n_slots": self.n_slots,
            "dt_s": self.dt,
            "slots": {
                "x_m": self.q[:, 0].tolist(),
                "y_m": self.q[:, 1].tolist(),
                "z_m": self.z.tolist(),
                "p_w": self.p.tolist(),
                "rate_bpshz": self.rate.tolist(),
                "worst_it_margin_db": self.it_margin_db.tolist(),
                "nearest_pr": self.nearest_pr.tolist(),
            },
        }
        if state is not None:
            rec["sca"] = {
                "iterations": state.iterations,
                "objective_history": state.objective_history,
                "converged": state.converged,
                "degraded": state.degraded,
                "notes": state.notes,
                "subproblems": state.subproblems,
            }
        return rec


def min_duration(m: MissionProfile) -> float:
    """Shortest time to fly straight between the mission endpoints."""
    horiz = float(np.linalg.norm(m.q_final - m.q_initial)) / m.v_h
    dz = m.z_final - m.z_initial
    vert = dz / m.v_a if dz >= 0.0 else -dz / m.v_d
    return max(horiz, vert)


def optimal_power_profile(s: Scenario, q: np.ndarray,
                          z: np.ndarray) -> np.ndarray:
    """Per-slot optimal power: full power capped by the tightest IT bound."""
    return np.minimum(power_cap(s, q, z), s.p_max)


def _leg_time(m: MissionProfile, q_a, z_a, q_b, z_b, vh, va, vd) -> float:
    horiz = float(np.linalg.norm(np.asarray(q_b) - np.asarray(q_a))) / vh
    dz = z_b - z_a
    vert = dz / va if dz >= 0.0 else -dz / vd
    return max(horiz, vert)


def _sample_piecewise(times, points, t_samples):
    """Linear interpolation through waypoints at the sample instants."""
    times = np.asarray(times)
    points = np.asarray(points, dtype=float)
    out = np.empty((t_samples.size, points.shape[1]))
    for j in range(points.shape[1]):
        out[:, j] = np.interp(t_samples, times, points[:, j])
    return out


def initial_trajectory(s: Scenario, m: MissionProfile,
                       placement: PlacementSolution | None = None,
                       **placement_kwargs) -> Trajectory:
    """Fly-hover-fly initializer (straight flight when time is too short).

    Flies a max-speed leg to the quasi-stationary optimum, hovers for the
    remaining slack, then flies a max-speed leg to the endpoint.  Legs use a
    tiny speed margin and interior slots are lifted marginally off the
    altitude floor so the result is strictly feasible for the barrier
    subproblems.
    """
    t_min = min_duration(m)
    if m.duration_t < t_min:
        raise InfeasibleMissionError(
            t_min, f"mission duration {m.duration_t:.1f} s is below the "
                   f"minimum required T_min = {t_min:.1f} s")
    if not (s.h_min <= m.z_initial <= s.h_max
            and s.h_min <= m.z_final <= s.h_max):
        raise InfeasibleMissionError(
            t_min, "mission endpoint altitudes fall outside [h_min, h_max]")

    if placement is None:
        placement = solve_placement(s, **placement_kwargs)
    q_star, z_star = placement.pos.q, placement.pos.z

    n = m.n_slots
    dt = m.dt
    t_prof = (n - 1) * dt  # motion happens across the N-1 slot steps
    vh = m.v_h * (1.0 - SPEED_MARGIN)
    va = m.v_a * (1.0 - SPEED_MARGIN)
    vd = m.v_d * (1.0 - SPEED_MARGIN)

    t1 = _leg_time(m, m.q_initial, m.z_initial, q_star, z_star, vh, va, vd)
    t2 = _leg_time(m, q_star, z_star, m.q_final, m.z_final, vh, va, vd)
    t_samples = dt * np.arange(n)

    if t1 + t2 <= t_prof:
        times = [0.0, t1, t_prof - t2, t_prof]
        points = [
            np.r_[m.q_initial, m.z_initial],
            np.r_[q_star, z_star],
            np.r_[q_star, z_star],
            np.r_[m.q_final, m.z_final],
        ]
        path = _sample_piecewise(times, points, t_samples)
    else:
        dist = float(np.linalg.norm(m.q_final - m.q_initial))
        dz = m.z_final - m.z_initial
        vert_need = dz / t_prof if dz >= 0 else -dz / t_prof
        if dist / t_prof > m.v_h or vert_need > (m.v_a if dz >= 0 else m.v_d):
            t_disc = t_min * n / (n - 1)
            raise InfeasibleMissionError(
                t_min, f"mission duration {m.duration_t:.1f} s is too short "
                       f"for the {n}-slot discretization; T_min = {t_min:.1f} s "
                       f"continuous, >= {t_disc:.1f} s at N = {n}")
        path = _sample_piecewise(
            [0.0, t_prof],
            [np.r_[m.q_initial, m.z_initial], np.r_[m.q_final, m.z_final]],
            t_samples)

    q = path[:, :2]
    z = path[:, 2]
    z[1:-1] = np.clip(z[1:-1], s.h_min + Z_LIFT, s.h_max - Z_LIFT)
    return Trajectory.from_path(s, m, q, z)


def _exact_avg_rate(s: Scenario, q: np.ndarray, z: np.ndarray) -> float:
    p = optimal_power_profile(s, q, z)
    return float(np.mean(rate_profile(s, q, z, p)))


def _build_subproblem(s: Scenario, m: MissionProfile, q: np.ndarray,
                      z: np.ndarray, optimize_altitude: bool):
    n = q.shape[0]
    fixed = np.zeros((n, 5), dtype=bool)
    fixed[0, :3] = True
    fixed[-1, :3] = True
    if not optimize_altitude:
        fixed[:, 2] = True
    a2 = s.alpha / 2.0
    zeta2 = (np.sum(q * q, axis=1) + z * z) ** a2
    prog = SmoothConvexProgram(
        q_loc=q, z_loc=z, zeta2_loc=zeta2, w=s.pr_locations,
        eta_u=s.eta_u, alpha=s.alpha, p_max=s.p_max,
        it_coeff=s.gamma_it / s.beta_0,
        v_h=m.v_h * m.dt, v_a=m.v_a * m.dt, v_d=m.v_d * m.dt,
        h_min=s.h_min, h_max=s.h_max, fixed=fixed)
    # Strict interior start: zeta1 just below the closed-form power (equal to
    # the linearized bound at the expansion point), zeta2 just above the
    # composite, free altitudes pulled marginally off the box faces.
    z0 = z.copy()
    if optimize_altitude:
        z0[1:-1] = np.clip(z0[1:-1], s.h_min + 0.1 * Z_LIFT,
                           s.h_max - 0.1 * Z_LIFT)
    p_exact = optimal_power_profile(s, q, z0)
    zeta1 = np.maximum(p_exact * (1.0 - 1e-7), 1e-12 * s.p_max)
    x0 = np.column_stack([q, z0, zeta1, zeta2 * (1.0 + 1e-7)])
    return prog, x0


def sca_optimize(s: Scenario, m: MissionProfile, init: Trajectory,
                 opts: PlanOptions | None = None) -> tuple[Trajectory, ScaState]:
    """Iterate convex surrogates from a feasible initial trajectory.

    Each accepted iterate is feasible for the original problem and the exact
    average rate never decreases; the loop stops on small improvement or at
    the iteration cap.  The returned trajectory carries exact closed-form
    powers and rates.
    """
    opts = opts or PlanOptions()
    bad = init.violations(s, m)
    if bad:
        raise ValueError("initial trajectory infeasible: " + "; ".join(bad))
    if not opts.optimize_altitude:
        if abs(m.z_initial - s.h_min) > 1e-9 or abs(m.z_final - s.h_min) > 1e-9:
            raise ValueError("altitude-frozen planning requires the mission "
                             "endpoints at h_min")

    state = ScaState()
    q, z = init.q.copy(), init.z.copy()
    if not opts.optimize_altitude:
        z = np.full_like(z, s.h_min)
    state.objective_history.append(_exact_avg_rate(s, q, z))

    if s.gamma_it == 0.0:
        state.converged = True
        state.notes.append("Gamma = 0: transmit power pinned at zero")
        return Trajectory.from_path(s, m, q, z), state

    for j in range(1, opts.j_max + 1):
        prog, x0 = _build_subproblem(s, m, q, z, opts.optimize_altitude)
        try:
            sol = solve_smooth_convex(prog, x0, tol=opts.barrier_tol,
                                      linsolve=opts.linsolve,
                                      backend=opts.backend)
        except StrictStartError as exc:
            state.degraded = True
            state.notes.append(f"iteration {j}: {exc}")
            break
        state.iterations = j
        iterate = Trajectory.from_path(
            s, m, sol.x[:, :2], z if not opts.optimize_altitude else sol.x[:, 2])
        state.subproblems.append({
            "surrogate_objective": sol.objective,
            "kkt_residual": sol.kkt_residual,
            "newton_iterations": sol.newton_iterations,
            "degraded": sol.degraded,
            "message": sol.message,
            "iterate_violations": iterate.violations(s, m),
        })
        if sol.degraded:
            state.degraded = True
            state.notes.append(f"iteration {j}: {sol.message}")
        q_new, z_new = sol.x[:, :2], sol.x[:, 2]
        if not opts.optimize_altitude:
            z_new = z  # frozen column never moves
        obj_new = _exact_avg_rate(s, q_new, z_new)
        prev = state.objective_history[-1]
        if obj_new < prev:
            # The surrogate guarantees ascent up to solver tolerance; treat a
            # non-improving step as converged and keep the previous iterate.
            state.converged = True
            state.notes.append(f"iteration {j}: non-improving step "
                               f"({obj_new:.9f} < {prev:.9f}) discarded")
            break
        q, z = q_new, z_new
        state.objective_history.append(obj_new)
        if obj_new - prev < opts.eps_sca * (1.0 + abs(obj_new)):
            state.converged = True
            break
        if state.degraded:
            break

    return Trajectory.from_path(s, m, q, z), state


def plan(s: Scenario, m: MissionProfile,
         opts: PlanOptions | None = None) -> tuple[Trajectory, ScaState]:
    """End-to-end mobile plan: placement, initializer, SCA, power restore."""
    opts = opts or PlanOptions()
    placement = solve_placement(s, eps_bis=opts.eps_bis,
                                rank_tol=opts.rank_tol, seed=opts.seed,
                                eps_feas=opts.eps_feas)
    init = initial_trajectory(s, m, placement)
    traj, state = sca_optimize(s, m, init, opts)
    state.notes.append(f"hover target ({placement.pos.q[0]:.1f}, "
                       f"{placement.pos.q[1]:.1f}, {placement.pos.z:.1f})")
    return traj, state
