"""Command-line front end.

Verbs: place (static placement), plan (mobile trajectory), sweep (parameter
sweeps to CSV), bench (one benchmark scheme), oracle (brute-force grid
check).  Exit codes: 0 success, 1 infeasible input, 2 config/usage errors.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .placement import grid_oracle, solve_placement
from .scenario import ConfigError, load_scenario, save_results, watts_to_dbm
from .trajectory import InfeasibleMissionError, MissionProfile, PlanOptions, plan


def _add_common(p):
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for every randomized step (default 0)")
    p.add_argument("--eps-bis", type=float, default=1e-6,
                   help="bisection tolerance on the normalized SNR level")
    p.add_argument("--eps-feas", type=float, default=1e-8,
                   help="phase-I feasibility tolerance (scaled units)")
    p.add_argument("--rank-tol", type=float, default=1e-4,
                   help="eigenvalue-ratio threshold for randomization")
    p.add_argument("--verbose", action="store_true")


def _add_mission(p):
    p.add_argument("--mission", default=None,
                   help="TOML file with a [mission] table (defaults to the "
                        "scenario file's own mission table)")
    p.add_argument("--n-slots", type=int, default=None,
                   help="override slot count N")
    p.add_argument("--eps-sca", type=float, default=1e-4,
                   help="SCA stopping tolerance on the average rate")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coguav",
                                 description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("place", help="solve the static placement problem")
    _add_common(p)

    p = sub.add_parser("plan", help="solve the mobile trajectory problem")
    _add_common(p)
    _add_mission(p)
    p.add_argument("--flat", action="store_true",
                   help="freeze the altitude at h_min (2D benchmark variant)")

    p = sub.add_parser("sweep", help="run a parameter sweep, write CSV")
    _add_common(p)
    _add_mission(p)
    p.add_argument("--param", required=True, choices=experiments.SWEEP_PARAMS)
    p.add_argument("--values", required=True,
                   help="comma-separated values of the swept parameter")
    p.add_argument("--schemes",
                   default=",".join(experiments.STATIC_SCHEMES),
                   help="comma-separated scheme names")
    p.add_argument("--layouts", type=int, default=100,
                   help="random layouts per k-count point")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent sweep points")

    p = sub.add_parser("bench", help="run one benchmark scheme")
    _add_common(p)
    _add_mission(p)
    p.add_argument("--scheme", required=True, choices=experiments.ALL_SCHEMES)

    p = sub.add_parser("oracle", help="brute-force grid search (verifier)")
    _add_common(p)
    p.add_argument("--box", type=float, default=600.0,
                   help="half-width of the centered search box, meters")
    p.add_argument("--step", type=float, default=5.0, help="grid step, meters")
    return ap


def _load(args, need_mission: bool):
    scenario, mission = load_scenario(args.scenario)
    if getattr(args, "mission", None):
        _, mission = load_scenario(args.mission)
        if mission is None:
            raise ConfigError(f"{args.mission} has no [mission] table")
    if need_mission and mission is None:
        raise ConfigError("this command needs a [mission] table (use "
                          "--mission or add one to the scenario file)")
    if mission is not None and getattr(args, "n_slots", None):
        mission = MissionProfile(
            q_initial=mission.q_initial, q_final=mission.q_final,
            z_initial=mission.z_initial, z_final=mission.z_final,
            v_h=mission.v_h, v_a=mission.v_a, v_d=mission.v_d,
            duration_t=mission.duration_t, n_slots=args.n_slots)
    return scenario, mission


def _opts(args) -> PlanOptions:
    return PlanOptions(
        eps_sca=getattr(args, "eps_sca", 1e-4),
        eps_bis=args.eps_bis,
        eps_feas=args.eps_feas,
        rank_tol=args.rank_tol,
        seed=args.seed,
        optimize_altitude=not getattr(args, "flat", False),
    )


def _emit(args, payload: dict):
    save_results(args.out or "-", payload)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "place":
            scenario, _ = _load(args, need_mission=False)
            sol = solve_placement(scenario, eps_bis=args.eps_bis,
                                  rank_tol=args.rank_tol, seed=args.seed,
                                  eps_feas=args.eps_feas)
            if args.verbose:
                print(f"# method={sol.method} diagnostics={sol.diagnostics}",
                      file=sys.stderr)
            _emit(args, sol.record(scenario))
            return 0

        if args.verb == "plan":
            scenario, mission = _load(args, need_mission=True)
            traj, state = plan(scenario, mission, _opts(args))
            if args.verbose:
                hist = ", ".join(f"{v:.5f}" for v in state.objective_history)
                print(f"# sca iterations={state.iterations} history=[{hist}]",
                      file=sys.stderr)
            if args.out and args.out.endswith(".csv"):
                traj.write_csv(args.out)
            else:
                save_results(args.out or "-", traj.record(state))
            return 0

        if args.verb == "sweep":
            scenario, mission = _load(args, need_mission=False)
            schemes = tuple(x.strip() for x in args.schemes.split(",") if x)
            values = [float(x) for x in args.values.split(",") if x.strip()]
            spec = experiments.SweepSpec(
                param=args.param, values=values, scenario=scenario,
                mission=mission, schemes=schemes, seed=args.seed,
                n_layouts=args.layouts, opts=_opts(args))
            rows = experiments.run_sweep(spec, out_path=args.out,
                                         jobs=args.jobs)
            if args.out is None:
                for r in rows:
                    print(f"{r['swept_param']},{r['value']:.10g},"
                          f"{r['scheme']},{r['rate_bpshz']:.10g}")
            return 0

        if args.verb == "bench":
            scenario, mission = _load(
                args, need_mission=args.scheme in experiments.MOBILE_SCHEMES)
            rec = experiments.run_benchmark(args.scheme, scenario, mission,
                                            _opts(args))
            _emit(args, rec)
            return 0

        if args.verb == "oracle":
            scenario, _ = _load(args, need_mission=False)
            pos, p, rate = grid_oracle(
                scenario, (-args.box, args.box, -args.box, args.box),
                args.step)
            _emit(args, {"position_m": {"x": pos.q[0], "y": pos.q[1],
                                        "z": pos.z},
                         "power_w": p, "power_dbm": watts_to_dbm(p),
                         "rate_bpshz": rate,
                         "box_m": args.box, "step_m": args.step})
            return 0
    except InfeasibleMissionError as exc:
        print(f"error: {exc} (T_min = {exc.t_min:.1f} s)", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
