"""Experiment harness: parameter sweeps over scenarios, algorithms and
seeds with CSV emission.

Four sweep axes mirror the evaluation plots: MES cache capacity, SBS
count, Zipf skewness, and HMD cache capacity.  Every emitted row carries
the full parameter provenance (generation config, solver knobs, seed), so
a table can be reproduced byte-for-byte from its own columns.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .model import GenerationConfig, desk_config, generate_scenario
from .latency import cache_hit_ratio, delay_sum
from .jcpt import SolveResult, SolverConfig, jcpt_solve
from . import baselines

__all__ = ["ExperimentConfig", "SWEEP_AXES", "run_experiment",
           "sweep_parameter", "rows_to_csv", "write_csv"]

SWEEP_AXES = {
    "mes-cache-capacity": "mes_cache_bits",
    "sbs-count": "sbs_count",
    "zipf-lambda": "zipf_lambda",
    "hmd-cache-capacity": "hmd_cache_bits",
}

ALGORITHMS = ("jcpt", "no", "pea", "pf", "lru")


@dataclass
class ExperimentConfig:
    """One experiment: generation preset, algorithms, one sweep axis,
    seeds, solver knobs."""

    generation: GenerationConfig = field(default_factory=desk_config)
    algorithms: tuple[str, ...] = ("jcpt", "no", "pea", "pf")
    sweep_axis: str = "mes-cache-capacity"
    sweep_values: tuple[float, ...] = ()
    seeds: tuple[int, ...] = (0,)
    solver: SolverConfig = field(default_factory=SolverConfig)
    lru_trace_steps: int | None = None

    def validate(self) -> None:
        if not self.algorithms:
            raise ValueError("algorithm list must be non-empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unsupported sweep axis {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ValueError("sweep values must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        for v in self.sweep_values:
            if v <= 0:
                raise ValueError("sweep values must be positive")


def _solve_one(scenario, algorithm: str, solver: SolverConfig,
               lru_steps, seed: int) -> SolveResult:
    if algorithm == "jcpt":
        return jcpt_solve(scenario, solver)
    if algorithm == "no":
        return baselines.solve_nearest_offloading(
            scenario, power_mode=solver.power_mode
            if solver.power_mode != "pinned" else "continuous",
            power_levels=solver.power_levels)
    if algorithm == "pea":
        return baselines.solve_power_equal(scenario, solver)
    if algorithm == "pf":
        return baselines.solve_popularity_first(scenario, solver)
    if algorithm == "lru":
        trace = baselines.generate_trace(scenario, steps=lru_steps, seed=seed)
        return baselines.solve_lru(scenario, trace)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _result_row(cfg: ExperimentConfig, gen: GenerationConfig, value, seed,
                algorithm, scenario, res: SolveResult) -> dict:
    if res.feasible and res.best_decision is not None:
        if algorithm == "lru" and res.trace_metrics:
            hit = res.trace_metrics["trace_hit_ratio"]
        else:
            hit = cache_hit_ratio(scenario, res.best_decision)
        unweighted = delay_sum(scenario, res.best_decision)
        objective_val = res.best_value
    else:
        hit, unweighted, objective_val = math.nan, math.nan, math.nan
    row = {
        "axis": cfg.sweep_axis,
        "value": value,
        "seed": seed,
        "algorithm": algorithm,
        "objective_weighted_s": objective_val,
        "delay_sum_unweighted_s": unweighted,
        "cache_hit_ratio": hit,
        "infeasible": 0 if res.feasible else 1,
        "iterations": res.iterations,
        "boxes_explored": res.boxes_explored,
        "final_lower_bound_s": res.global_lower_bound,
    }
    for f in fields(gen):
        row[f"gen_{f.name}"] = getattr(gen, f.name)
    row["solver_tolerance"] = cfg.solver.tolerance
    row["solver_max_iterations"] = cfg.solver.max_iterations
    row["solver_restarts"] = cfg.solver.restarts
    row["solver_seed"] = cfg.solver.seed
    row["solver_power_mode"] = cfg.solver.power_mode
    row["solver_power_levels"] = cfg.solver.power_levels
    return row


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Run every (sweep value, seed, algorithm) cell; returns result rows.

    Infeasible cells are recorded with infeasible=1 and the run continues.
    Identical configs produce identical tables.
    """
    cfg.validate()
    axis_field = SWEEP_AXES[cfg.sweep_axis]
    rows = []
    for value in cfg.sweep_values:
        if axis_field == "sbs_count":
            gen = replace(cfg.generation, **{axis_field: int(value)})
        else:
            gen = replace(cfg.generation, **{axis_field: float(value)})
        for seed in cfg.seeds:
            scenario = generate_scenario(gen, seed)
            for algorithm in cfg.algorithms:
                res = _solve_one(scenario, algorithm, cfg.solver,
                                 cfg.lru_trace_steps, seed)
                rows.append(_result_row(cfg, gen, value, seed, algorithm,
                                        scenario, res))
    return rows


def sweep_parameter(cfg: ExperimentConfig, axis: str, values) -> list[dict]:
    """run_experiment varying exactly one axis, with per-(value, algorithm)
    mean and standard deviation columns attached to every row."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unsupported sweep axis {axis!r}")
    cfg = replace(cfg, sweep_axis=axis, sweep_values=tuple(values))
    rows = run_experiment(cfg)
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["value"], row["algorithm"]), []).append(row)
    for (value, algorithm), members in groups.items():
        obj = np.array([r["objective_weighted_s"] for r in members], float)
        hits = np.array([r["cache_hit_ratio"] for r in members], float)
        stats = {
            "objective_mean_s": float(np.nanmean(obj)) if obj.size else math.nan,
            "objective_std_s": float(np.nanstd(obj)) if obj.size else math.nan,
            "hit_ratio_mean": float(np.nanmean(hits)) if hits.size else math.nan,
            "hit_ratio_std": float(np.nanstd(hits)) if hits.size else math.nan,
        }
        for r in members:
            r.update(stats)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    """Render rows as CSV text with a header; column order follows the
    first row, rows ordered by (value, seed, algorithm)."""
    if not rows:
        return ""
    ordered = sorted(rows, key=lambda r: (r["value"], r["seed"], r["algorithm"]))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(ordered[0].keys()))
    writer.writeheader()
    for row in ordered:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def experiment_config_from_json(text: str) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON document; unknown keys error."""
    doc = json.loads(text)
    gen_doc = doc.pop("generation", {})
    solver_doc = doc.pop("solver", {})
    gen_fields = {f.name for f in fields(GenerationConfig)}
    unknown = set(gen_doc) - gen_fields
    if unknown:
        raise ValueError(f"unknown generation keys: {sorted(unknown)}")
    solver_fields = {f.name for f in fields(SolverConfig)}
    unknown = set(solver_doc) - solver_fields
    if unknown:
        raise ValueError(f"unknown solver keys: {sorted(unknown)}")
    gen = GenerationConfig(**gen_doc)
    solver = SolverConfig(**solver_doc)
    cfg_fields = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - cfg_fields
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    for key in ("algorithms", "sweep_values", "seeds"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return ExperimentConfig(generation=gen, solver=solver, **doc)
