"""Benchmark schemes, parameter sweeps and plot-ready data generation.

Static schemes: the proposed joint placement+power design against power-only
(UAV parked above the SR) and placement-only (full power, location via the
same lifted relaxation).  Mobile schemes: the proposed joint 3D trajectory
design against its altitude-frozen 2D variant and plain power control on the
fly-hover-fly initial trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .placement import (PlacementSolution, it_margins_db, solve_placement,
                        solve_placement_fixed_power)
from .scenario import (MissionProfile, Position3D, Scenario, achievable_rate,
                       dbm_to_watts, watts_to_dbm)
from .trajectory import PlanOptions, initial_trajectory, plan

STATIC_SCHEMES = ("proposed-static", "power-only", "placement-only")
MOBILE_SCHEMES = ("proposed-mobile", "2d-mobile", "power-on-initial-traj")
ALL_SCHEMES = STATIC_SCHEMES + MOBILE_SCHEMES

SWEEP_PARAMS = ("pr-distance", "gamma", "p-max", "k-count", "duration")


def power_only(s: Scenario) -> PlacementSolution:
    """Benchmark: UAV above the SR at h_min, power from the closed form."""
    pos = Position3D(np.zeros(2), s.h_min)
    d2 = s.h_min ** 2 + np.sum(s.pr_locations ** 2, axis=1)
    cap = (s.gamma_it / s.beta_0) * np.min(d2) ** (s.alpha / 2.0)
    p = float(min(s.p_max, cap))
    tau = p ** (2.0 / s.alpha) / s.h_min ** 2
    return PlacementSolution(pos, p, achievable_rate(s, pos, p), tau,
                             "fixed-q", {"scheme": "power-only"})


def run_benchmark(scheme: str, s: Scenario, m: MissionProfile | None = None,
                  opts: PlanOptions | None = None) -> dict:
    """Run one scheme and return a flat result record."""
    opts = opts or PlanOptions()
    if scheme in STATIC_SCHEMES:
        if scheme == "proposed-static":
            sol = solve_placement(s, eps_bis=opts.eps_bis,
                                  rank_tol=opts.rank_tol, seed=opts.seed,
                                  eps_feas=opts.eps_feas)
        elif scheme == "power-only":
            sol = power_only(s)
        else:
            sol = solve_placement_fixed_power(s, eps_bis=opts.eps_bis,
                                              rank_tol=opts.rank_tol,
                                              seed=opts.seed,
                                              eps_feas=opts.eps_feas)
        return {
            "scheme": scheme,
            "rate_bpshz": sol.rate,
            "x_m": float(sol.pos.q[0]),
            "y_m": float(sol.pos.q[1]),
            "z_m": sol.pos.z,
            "p_dbm": watts_to_dbm(sol.p),
            "method": sol.method,
            "worst_it_margin_db": float(np.min(it_margins_db(s, sol.pos, sol.p))),
            "diagnostics": sol.diagnostics,
        }
    if scheme not in MOBILE_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; pick one of {ALL_SCHEMES}")
    if m is None:
        raise ValueError(f"scheme {scheme!r} needs a mission profile")
    if scheme == "power-on-initial-traj":
        traj = initial_trajectory(s, m, None, eps_bis=opts.eps_bis,
                                  rank_tol=opts.rank_tol, seed=opts.seed)
        state = None
    else:
        if scheme == "2d-mobile":
            opts = PlanOptions(**{**opts.__dict__, "optimize_altitude": False})
        traj, state = plan(s, m, opts)
    rec = {
        "scheme": scheme,
        "rate_bpshz": traj.avg_rate,
        "x_m": float("nan"),
        "y_m": float("nan"),
        "z_m": float(np.max(traj.z)),
        "p_dbm": watts_to_dbm(float(np.min(traj.p))),
        "method": "sca" if state is not None else "closed-form-power",
        "worst_it_margin_db": float(np.min(traj.it_margin_db)),
        "diagnostics": {} if state is None else {
            "iterations": state.iterations,
            "objective_history": state.objective_history,
            "converged": state.converged,
            "degraded": state.degraded,
        },
    }
    return rec


@dataclass
class SweepSpec:
    """One parameter sweep: which knob, which values, which schemes."""

    param: str
    values: list
    scenario: Scenario
    mission: MissionProfile | None = None
    schemes: tuple = STATIC_SCHEMES
    seed: int = 0
    n_layouts: int = 100   # random layouts averaged per point (k-count only)
    opts: PlanOptions = field(default_factory=PlanOptions)

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.param!r}; "
                             f"pick one of {SWEEP_PARAMS}")
        vals = [float(v) for v in self.values]
        if not vals:
            raise ValueError("sweep needs at least one value")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be monotone non-decreasing")
        self.values = vals
        unknown = set(self.schemes) - set(ALL_SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes: {sorted(unknown)}")


def _with(s: Scenario, **overrides) -> Scenario:
    fields = dict(
        pr_locations=s.pr_locations, beta_u=s.beta_u, beta_0=s.beta_0,
        sigma2=s.sigma2, alpha=s.alpha, gamma_it=s.gamma_it, p_max=s.p_max,
        h_min=s.h_min, h_max=s.h_max)
    fields.update(overrides)
    return Scenario(**fields)


def _point_instances(spec: SweepSpec, value: float):
    """Scenario/mission instances for one swept value (several for k-count)."""
    s, m = spec.scenario, spec.mission
    if spec.param == "pr-distance":
        if s.n_prs != 1:
            raise ValueError("pr-distance sweep expects a single-PR scenario")
        return [(_with(s, pr_locations=np.array([[value, 0.0]])), m)]
    if spec.param == "gamma":
        return [(_with(s, gamma_it=dbm_to_watts(value)), m)]
    if spec.param == "p-max":
        return [(_with(s, p_max=dbm_to_watts(value)), m)]
    if spec.param == "duration":
        if m is None:
            raise ValueError("duration sweep needs a mission profile")
        n = max(2, int(np.ceil(value)))
        m2 = MissionProfile(q_initial=m.q_initial, q_final=m.q_final,
                            z_initial=m.z_initial, z_final=m.z_final,
                            v_h=m.v_h, v_a=m.v_a, v_d=m.v_d,
                            duration_t=value, n_slots=n)
        return [(s, m2)]
    # k-count: random PR layouts in a 200 x 200 m^2 box centered on the SR.
    rng = np.random.default_rng(spec.seed + int(value))
    out = []
    for _ in range(spec.n_layouts):
        prs = rng.uniform(-100.0, 100.0, size=(int(value), 2))
        out.append((_with(s, pr_locations=prs), m))
    return out


def run_sweep(spec: SweepSpec, out_path=None, jobs: int = 1) -> list[dict]:
    """Evaluate every (value, scheme) pair; rows sorted, deterministic.

    Writes a CSV (plus a JSON diagnostics sidecar) when ``out_path`` is
    given.  ``jobs`` > 1 evaluates sweep points concurrently; the output
    order does not depend on it.
    """
    tasks = []
    for value in spec.values:
        for scheme in spec.schemes:
            tasks.append((value, scheme))

    def eval_point(args):
        value, scheme = args
        rates, recs = [], []
        for s_i, m_i in _point_instances(spec, value):
            rec = run_benchmark(scheme, s_i, m_i, spec.opts)
            rates.append(rec["rate_bpshz"])
            recs.append(rec)
        mean = float(np.mean(rates))
        return {"swept_param": spec.param, "value": value, "scheme": scheme,
                "rate_bpshz": mean, "n_instances": len(rates),
                "records": recs}

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(eval_point, tasks))
    else:
        rows = [eval_point(t) for t in tasks]
    rows.sort(key=lambda r: (r["value"], r["scheme"]))

    if out_path is not None:
        write_sweep_csv(rows, out_path, spec)
    return rows


def write_sweep_csv(rows: list[dict], out_path, spec: SweepSpec):
    out_path = Path(out_path)
    lines = [f"# coguav sweep param={spec.param} seed={spec.seed}",
             "swept_param,value,scheme,rate_bpshz,n_instances"]
    for r in rows:
        lines.append(f"{r['swept_param']},{r['value']:.10g},{r['scheme']},"
                     f"{r['rate_bpshz']:.10g},{r['n_instances']}")
    out_path.write_text("\n".join(lines) + "\n")
    sidecar = out_path.with_suffix(out_path.suffix + ".meta.json")
    meta = [{k: v for k, v in r.items()} for r in rows]
    sidecar.write_text(json.dumps(meta, indent=2, default=_default) + "\n")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


# Representative ten-PR layout for the 2 x 2 km crossing mission: four PRs
# flank the inbound leg, four flank the outbound leg, two sit off the path.
# Coordinates are approximate by construction; treat them as a demo layout.
TEN_PR_LAYOUT = np.array([
    [-800.0, 850.0],
    [-600.0, 650.0],
    [-480.0, 420.0],
    [-280.0, 280.0],
    [650.0, 600.0],
    [850.0, 250.0],
    [250.0, -180.0],
    [480.0, -420.0],
    [650.0, -600.0],
    [850.0, -830.0],
])


def crossing_mission(duration_t: float = 200.0,
                  n_slots: int | None = None) -> MissionProfile:
    """Mission endpoints and Inspire-2 speed limits of the mobile scenario."""
    if n_slots is None:
        n_slots = max(2, int(np.ceil(duration_t)))
    return MissionProfile(q_initial=[-950.0, 1000.0], q_final=[1000.0, -1000.0],
                          z_initial=170.0, z_final=170.0,
                          v_h=26.0, v_a=6.0, v_d=4.0,
                          duration_t=duration_t, n_slots=n_slots)


def default_scenario(prs=None, gamma_dbm: float = -80.0,
                   p_max_dbm: float = 23.0, alpha: float = 2.0) -> Scenario:
    """Default numeric setup: beta = -30 dB, sigma2 = -80 dBm, H in [170, 220]."""
    if prs is None:
        prs = [[100.0, 0.0]]
    return Scenario(pr_locations=np.asarray(prs, dtype=float),
                    beta_u=1e-3, beta_0=1e-3, sigma2=1e-11, alpha=alpha,
                    gamma_it=dbm_to_watts(gamma_dbm),
                    p_max=dbm_to_watts(p_max_dbm), h_min=170.0, h_max=220.0)
