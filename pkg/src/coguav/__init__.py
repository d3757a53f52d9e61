"""coguav: joint UAV maneuver and transmit-power optimization under
interference-temperature constraints, for quasi-stationary (3D placement)
and mobile (3D trajectory) secondary transmitters."""

from .barrier import SmoothConvexProgram, StrictStartError, solve_smooth_convex
from .experiments import SweepSpec, run_benchmark, run_sweep
from .placement import (PlacementSolution, grid_oracle, solve_given_horizontal,
                        solve_placement, solve_placement_fixed_power,
                        solve_single_pr)
from .scenario import (ConfigError, MissionProfile, Position3D, Scenario,
                       achievable_rate, channel_gain_sr, db_to_linear,
                       dbm_to_watts, interference_at_pr, linear_to_db,
                       load_scenario, save_results, save_scenario,
                       watts_to_dbm)
from .sdp import SdpInstance, SdpOutcome, solve_sdp_feasibility
from .trajectory import (InfeasibleMissionError, PlanOptions, ScaState,
                         Trajectory, initial_trajectory, min_duration,
                         optimal_power_profile, plan, sca_optimize)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InfeasibleMissionError", "MissionProfile",
    "PlacementSolution", "PlanOptions", "Position3D", "ScaState", "Scenario",
    "SdpInstance", "SdpOutcome", "SmoothConvexProgram", "StrictStartError",
    "SweepSpec", "Trajectory", "achievable_rate", "channel_gain_sr",
    "db_to_linear", "dbm_to_watts", "grid_oracle", "initial_trajectory",
    "interference_at_pr", "linear_to_db", "load_scenario", "min_duration",
    "optimal_power_profile", "plan", "run_benchmark", "run_sweep",
    "save_results", "save_scenario", "sca_optimize", "solve_given_horizontal",
    "solve_placement", "solve_placement_fixed_power", "solve_sdp_feasibility",
    "solve_single_pr", "solve_smooth_convex", "watts_to_dbm",
]
