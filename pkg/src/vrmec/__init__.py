"""vrmec: latency simulation and optimization for VR viewpoint delivery
over MEC-enabled small-cell networks.

The package models joint caching (monocular/stereoscopic versions at edge
servers and headsets), downlink power allocation under universal frequency
reuse, and horizontal/vertical task offloading; minimizes the
popularity-weighted end-to-end latency with a discrete
branch-reduce-and-bound solver (JCPT); and benchmarks it against four
baseline strategies with an exhaustive oracle for tiny instances.
"""

from .model import (
    GenerationConfig, Scenario, Viewpoint,
    desk_config, generate_scenario, micro_config, paper_config,
    scenario_from_json, scenario_to_json, validate_scenario, zipf_popularity,
)
from .radio import (
    PowerAllocation, allocate_power, grid_power, link_rate, max_rate_matrix,
    rate_matrix, sinr, sinr_matrix,
)
from .latency import (
    UNREACHABLE, Decision, FeasibilityReport, cache_hit_ratio,
    check_feasibility, decision_from_json, decision_to_json, delay_sum,
    energy_usage, objective, request_latency,
)
from .jcpt import (
    Box, SolveResult, SolverConfig, branch, bound, from_monotone, jcpt_solve,
    reduce_box, to_monotone,
)
from .baselines import (
    RequestTrace, generate_trace, greedy_cache_power,
    solve_lru, solve_nearest_offloading, solve_popularity_first,
    solve_power_equal,
)
from .oracle import OracleResult, brute_force_solve
from .experiments import ExperimentConfig, run_experiment, sweep_parameter

__version__ = "0.1.0"
