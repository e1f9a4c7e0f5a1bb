"""Command-line front end: scenario generation, single solves, sweeps.

Exit codes: 0 success, 2 configuration error, 3 the run produced only
infeasible results.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields, replace

from .model import GenerationConfig, generate_scenario, scenario_from_json, \
    scenario_to_json
from .latency import cache_hit_ratio, decision_to_json, delay_sum
from .jcpt import SolverConfig, jcpt_solve
from . import baselines
from .experiments import (SWEEP_AXES, experiment_config_from_json,
                          run_experiment, sweep_parameter, write_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _load_generation_config(path: str) -> GenerationConfig:
    with open(path) as fh:
        doc = json.load(fh)
    known = {f.name for f in fields(GenerationConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown generation keys: {sorted(unknown)}")
    return GenerationConfig(**doc)


def _cmd_generate(args) -> int:
    cfg = _load_generation_config(args.config) if args.config else GenerationConfig()
    scenario = generate_scenario(cfg, args.seed)
    with open(args.out, "w") as fh:
        fh.write(scenario_to_json(scenario))
    print(f"wrote scenario ({scenario.sbs_count} SBSs, {scenario.hmd_count} HMDs, "
          f"{scenario.viewpoint_count} viewpoints) to {args.out}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    with open(args.scenario) as fh:
        scenario = scenario_from_json(fh.read())
    solver = SolverConfig(tolerance=args.tolerance, seed=args.seed,
                          max_iterations=args.max_iterations,
                          restarts=args.restarts)
    if args.algorithm == "jcpt":
        res = jcpt_solve(scenario, solver)
    elif args.algorithm == "no":
        res = baselines.solve_nearest_offloading(scenario)
    elif args.algorithm == "pea":
        res = baselines.solve_power_equal(scenario, solver)
    elif args.algorithm == "pf":
        res = baselines.solve_popularity_first(scenario, solver)
    elif args.algorithm == "lru":
        trace = baselines.generate_trace(scenario, seed=args.seed)
        res = baselines.solve_lru(scenario, trace)
    else:
        print(f"unknown algorithm {args.algorithm!r}", file=sys.stderr)
        return EXIT_CONFIG

    if args.trace:
        open_counts = res.open_box_trace or [0] * len(res.bound_trace)
        with open(args.trace, "w") as fh:
            fh.write("iteration,f_min,f_max,incumbent,boxes_open\n")
            for it, ((fmin, fmax, inc), nopen) in enumerate(
                    zip(res.bound_trace, open_counts)):
                fh.write(f"{it},{fmin!r},{fmax!r},{inc!r},{nopen}\n")

    doc = {
        "algorithm": res.algorithm,
        "feasible": res.feasible,
        "objective_weighted_s": res.best_value if res.feasible else None,
        "delay_sum_unweighted_s":
            delay_sum(scenario, res.best_decision) if res.feasible else None,
        "cache_hit_ratio":
            cache_hit_ratio(scenario, res.best_decision) if res.feasible else None,
        "global_lower_bound_s": res.global_lower_bound
            if math.isfinite(res.global_lower_bound) else None,
        "iterations": res.iterations,
        "boxes_explored": res.boxes_explored,
        "wall_time_s": res.wall_time,
        "trace_metrics": res.trace_metrics,
        "decision": json.loads(decision_to_json(res.best_decision))
            if res.feasible else None,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    if not res.feasible:
        print("no feasible decision found", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"{res.algorithm}: objective {res.best_value:.6g} s, "
          f"hit ratio {doc['cache_hit_ratio']:.4f}, wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        cfg = experiment_config_from_json(fh.read())
    if args.values:
        values = tuple(float(v) for v in args.values.split(","))
    else:
        values = cfg.sweep_values
    if args.seeds:
        cfg = replace(cfg, seeds=tuple(int(x) for x in args.seeds.split(",")))
    rows = sweep_parameter(cfg, args.axis, values)
    write_csv(rows, args.out)
    infeasible = sum(r["infeasible"] for r in rows)
    print(f"wrote {len(rows)} rows to {args.out} ({infeasible} infeasible)")
    if rows and infeasible == len(rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrmec",
        description="VR delivery latency optimization over MEC small cells")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a scenario JSON")
    gen.add_argument("--config", help="generation config JSON", default=None)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)

    solve = sub.add_parser("solve", help="solve one scenario")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--algorithm", required=True,
                       choices=["jcpt", "no", "pea", "pf", "lru"])
    solve.add_argument("--tolerance", type=float, default=0.02)
    solve.add_argument("--max-iterations", type=int, default=5000)
    solve.add_argument("--restarts", type=int, default=8)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--trace", default=None,
                       help="per-iteration bound trace CSV")
    solve.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    sweep.add_argument("--config", required=True, help="experiment config JSON")
    sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sweep.add_argument("--values", default=None,
                       help="comma-separated sweep values")
    sweep.add_argument("--seeds", default=None, help="comma-separated seeds")
    sweep.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
