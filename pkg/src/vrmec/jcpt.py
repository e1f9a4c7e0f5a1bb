"""Discrete branch-reduce-and-bound solver for the joint caching, power
allocation and task offloading problem (JCPT).

The discrete decision space is mapped to a binary lattice on which the
weighted-latency objective is coordinate-wise monotone: MV-cache and
offload variables are complemented (raising them raises latency), SV-cache
variables are kept as-is (raising them never raises latency).  The solver
explores boxes [a, b] of that lattice:

* branch splits a box on one undecided dimension, so every child has one
  fewer free coordinate;
* reduce fixes coordinate values that no completion can use, either
  structurally (cache capacity, offload exclusivity, offload/cache
  coupling, serve-every-request) or because the relaxed objective bound
  with that value fixed already exceeds the incumbent;
* bound computes a relaxed lower bound (per-request best serving path
  under interference-free rate caps, ignoring cross-request capacity and
  energy coupling) and a heuristic upper bound (randomized offload
  completions finished by the greedy caching/power routine).

Power is never a box dimension: every bound evaluation solves the inner
power subproblem for the candidate discrete configuration (continuous
coordinate descent, an exhaustive grid, or a pinned matrix).
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import Scenario, validate_scenario
from .latency import Decision, energy_usage, objective
from .radio import (PowerAllocation, grid_min_weighted_delay, max_rate_matrix,
                    rate_matrix)

__all__ = [
    "SolverConfig",
    "Box",
    "SolveResult",
    "SolverContext",
    "to_monotone",
    "from_monotone",
    "branch",
    "reduce_box",
    "bound",
    "jcpt_solve",
]

_INF = math.inf

# Flattened block order of the substituted coordinate vector.  True marks
# complemented blocks (raw = 1 - substituted).
_BLOCKS = (
    ("cache_mes_mv", True),
    ("cache_mes_sv", False),
    ("cache_hmd_mv", True),
    ("cache_hmd_sv", False),
    ("offload_mes", True),
    ("offload_cloud", True),
)


@dataclass
class SolverConfig:
    """DBRB solver knobs.

    power_mode selects the inner power solver: "continuous" (coordinate
    descent), "equal" (deterministic equal split over serving links),
    "grid" (exhaustive over power_levels per active link, exact within the
    grid) or "pinned" (fixed matrix).  pinned_cache freezes the four cache
    matrices (popularity-first baseline); seed_completions adds
    deterministic greedy and nearest-association completions at the root
    so the incumbent starts from a strong feasible solution.

    Bounding completions run the continuous power solver at
    bound_power_rel_epsilon; the returned best decision is re-polished at
    the solver's own default tolerance.
    """

    tolerance: float = 0.02
    max_iterations: int = 5000
    restarts: int = 8
    seed: int = 0
    power_mode: str = "continuous"
    power_levels: int = 4
    pinned_power: np.ndarray | None = None
    pinned_cache: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None
    seed_completions: bool = True
    refine_rounds: int = 2
    polish_rounds: int = 6
    root_restarts: int = 8
    lean_children: bool = False
    bound_power_rel_epsilon: float = 1e-4
    grid_combo_cap: int = 500_000


@dataclass
class Box:
    """Sub-hyper-rectangle [lower, upper] of the substituted binary lattice.

    lower_bound / upper_bound bracket the objective restricted to the box;
    incumbent_decision, when present, is a feasible decision realizing
    upper_bound.
    """

    lower: np.ndarray
    upper: np.ndarray
    lower_bound: float = 0.0
    upper_bound: float = _INF
    incumbent_decision: Decision | None = None
    box_id: int = 0

    def undecided(self) -> np.ndarray:
        return self.upper - self.lower == 1

    def undecided_count(self) -> int:
        return int(self.undecided().sum())


@dataclass
class SolveResult:
    """Outcome of one solver run (JCPT or a baseline in the same format)."""

    algorithm: str
    feasible: bool
    best_decision: Decision | None
    best_value: float
    global_lower_bound: float
    iterations: int
    boxes_explored: int
    wall_time: float
    bound_trace: list[tuple[float, float, float]]  # (f_min, f_max, incumbent)
    trace_metrics: dict | None = None
    open_box_trace: list[int] | None = None        # parallel to bound_trace


# --- substitution bijection ---------------------------------------------

def _block_shapes(n: int, m: int, u: int) -> dict[str, tuple[int, ...]]:
    return {
        "cache_mes_mv": (n, m), "cache_mes_sv": (n, m),
        "cache_hmd_mv": (n, u), "cache_hmd_sv": (n, u),
        "offload_mes": (n, m, u), "offload_cloud": (n, m, u),
    }


def to_monotone(d: Decision) -> np.ndarray:
    """Map the discrete decision part to the substituted coordinate vector.

    MV-cache and offload blocks are complemented; SV-cache blocks map
    identically.  The inverse is from_monotone.
    """
    parts = []
    for name, complemented in _BLOCKS:
        arr = getattr(d, name)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
        flat = arr.reshape(-1).astype(np.int8)
        parts.append(1 - flat if complemented else flat)
    return np.concatenate(parts)


def from_monotone(s: Scenario, vec: np.ndarray) -> Decision:
    """Rebuild the discrete decision part from a substituted vector.

    The returned Decision carries an all-zeros power matrix; power is the
    inner continuous subproblem, not a lattice coordinate.
    """
    vec = np.asarray(vec)
    if not np.isin(vec, (0, 1)).all():
        raise ValueError("substituted coordinates must be binary")
    shapes = _block_shapes(s.viewpoint_count, s.sbs_count, s.hmd_count)
    total = sum(int(np.prod(shape)) for shape in shapes.values())
    if vec.shape != (total,):
        raise ValueError(f"expected vector of length {total}, got {vec.shape}")
    out = {}
    pos = 0
    for name, complemented in _BLOCKS:
        size = int(np.prod(shapes[name]))
        chunk = vec[pos:pos + size].astype(np.int8)
        out[name] = (1 - chunk if complemented else chunk).reshape(shapes[name])
        pos += size
    return Decision(power=PowerAllocation(np.zeros((s.sbs_count, s.hmd_count))),
                    **out)


# --- solver context ------------------------------------------------------

class SolverContext:
    """Static per-solve data: coordinate layout, option latencies, rates."""

    def __init__(self, s: Scenario, cfg: SolverConfig):
        self.scenario = s
        self.cfg = cfg
        n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
        self.n, self.m, self.u = n, m, u
        self.shapes = _block_shapes(n, m, u)
        self.slices: dict[str, slice] = {}
        pos = 0
        for name, _ in _BLOCKS:
            size = int(np.prod(self.shapes[name]))
            self.slices[name] = slice(pos, pos + size)
            pos += size
        self.total_dims = pos

        self.q = s.popularity
        self.mv = s.mv_sizes
        self.sv = s.sv_sizes
        self.t_mes = s.mes_compute_delay()
        self.t_loc = s.hmd_compute_delay()
        self.e_mes = s.mes_compute_energy()
        self.e_hmd = s.hmd_compute_energy()
        self.tau_b = s.backhaul_delay

        # Branch priority: popularity-weighted size of the dimension's
        # viewpoint (ties resolved by lowest flat index via argmax).
        impact = self.q * self.mv
        pieces = []
        for name, _ in _BLOCKS:
            shape = self.shapes[name]
            rep = int(np.prod(shape[1:]))
            pieces.append(np.repeat(impact, rep))
        self.priority = np.concatenate(pieces)

        if cfg.power_mode not in ("continuous", "equal", "grid", "pinned"):
            raise ValueError(f"unknown power mode {cfg.power_mode!r}")
        if cfg.power_mode == "pinned":
            if cfg.pinned_power is None:
                raise ValueError("pinned power mode requires pinned_power")
            rates = rate_matrix(s, cfg.pinned_power)
        else:
            rates = max_rate_matrix(s)
        with np.errstate(divide="ignore"):
            inv = np.where(rates > 0, 1.0 / np.where(rates > 0, rates, 1.0), _INF)
        # Optimistic transmission delay per (viewpoint, SBS, HMD).
        self.tx_bound = self.sv[:, None, None] * inv[None, :, :]

        # Rate estimate for greedy completions: budget shared among an
        # average association load, with a crude full-reuse interference
        # level so distant SBSs price in realistically.  Pinned mode uses
        # the exact pinned rates.
        if cfg.power_mode == "pinned":
            self.tx_est = self._tx_from_rates(rates)
            self.tx_est_optimistic = self.tx_est
        else:
            # Two rate guesses for greedy completions: a conservative one
            # assuming heavy interference load and an optimistic one
            # assuming optimized (light) load; refinement rounds reprice
            # whichever wins with the rates it actually achieves.
            share = max(1, math.ceil(u / m))
            h = s.channel_gain
            inter = s.total_power * (h.sum(axis=0, keepdims=True) - h)
            intra = s.orthogonality * s.total_power * h * (share - 1) / share
            sig = (s.total_power / share) * h
            conservative = s.bandwidth_per_hmd * np.log2(
                1.0 + sig / (0.5 * inter + intra + s.noise_power))
            optimistic = s.bandwidth_per_hmd * np.log2(
                1.0 + sig / (0.05 * inter + intra + s.noise_power))
            self.tx_est = self._tx_from_rates(conservative)
            self.tx_est_optimistic = self._tx_from_rates(optimistic)

    def _tx_from_rates(self, rates: np.ndarray) -> np.ndarray:
        """Per-(viewpoint, SBS, HMD) SV transmission delay for given rates."""
        with np.errstate(divide="ignore"):
            inv = np.where(rates > 0, 1.0 / np.where(rates > 0, rates, 1.0), _INF)
        return self.sv[:, None, None] * inv[None, :, :]

    # -- box <-> raw bounds ------------------------------------------

    def full_box(self) -> Box:
        lower = np.zeros(self.total_dims, np.int8)
        upper = np.ones(self.total_dims, np.int8)
        if self.cfg.pinned_cache is not None:
            mm, ms, hm, hs = self.cfg.pinned_cache
            for name, arr in (("cache_mes_mv", mm), ("cache_mes_sv", ms),
                              ("cache_hmd_mv", hm), ("cache_hmd_sv", hs)):
                complemented = dict(_BLOCKS)[name]
                sub = (1 - np.asarray(arr, np.int8) if complemented
                       else np.asarray(arr, np.int8)).reshape(-1)
                lower[self.slices[name]] = sub
                upper[self.slices[name]] = sub
        return Box(lower=lower, upper=upper, box_id=0)

    def raw_bounds(self, box: Box) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Per-tensor (raw_lower, raw_upper) views of a substituted box."""
        out = {}
        for name, complemented in _BLOCKS:
            shape = self.shapes[name]
            sub_lo = box.lower[self.slices[name]].reshape(shape)
            sub_hi = box.upper[self.slices[name]].reshape(shape)
            if complemented:
                out[name] = ((1 - sub_hi).astype(np.int8),
                             (1 - sub_lo).astype(np.int8))
            else:
                out[name] = (sub_lo.astype(np.int8).copy(),
                             sub_hi.astype(np.int8).copy())
        return out

    def box_from_raw(self, raw, template: Box) -> Box:
        lower = np.empty(self.total_dims, np.int8)
        upper = np.empty(self.total_dims, np.int8)
        for name, complemented in _BLOCKS:
            lo, hi = raw[name]
            if complemented:
                sub_lo, sub_hi = 1 - hi, 1 - lo
            else:
                sub_lo, sub_hi = lo, hi
            lower[self.slices[name]] = sub_lo.reshape(-1)
            upper[self.slices[name]] = sub_hi.reshape(-1)
        return Box(lower=lower, upper=upper, lower_bound=template.lower_bound,
                   upper_bound=template.upper_bound,
                   incumbent_decision=template.incumbent_decision,
                   box_id=template.box_id)


# --- branch ---------------------------------------------------------------

def branch(box: Box, k: int) -> tuple[Box, Box]:
    """Split on undecided dimension k: children fix coordinate k to 0 / 1.

    The children partition the box's lattice points by their k-th
    coordinate; each has one fewer undecided dimension.
    """
    if not (0 <= k < box.lower.size):
        raise ValueError(f"dimension {k} out of range")
    if box.upper[k] - box.lower[k] != 1:
        raise ValueError(f"dimension {k} is already decided")
    hi = box.upper.copy()
    hi[k] = 0
    child0 = Box(lower=box.lower.copy(), upper=hi,
                 lower_bound=box.lower_bound)
    lo = box.lower.copy()
    lo[k] = 1
    child1 = Box(lower=lo, upper=box.upper.copy(),
                 lower_bound=box.lower_bound)
    return child0, child1


# --- relaxed per-request bound --------------------------------------------

def _relaxed(ctx: SolverContext, raw) -> dict:
    """Per-request best-path relaxation over a box.

    Ignores cross-request capacity/energy coupling; uses interference-free
    rate caps (exact rates in pinned mode).  Returns the bound and the
    option statistics reduce_box needs for eliminations.
    """
    mm_lo, mm_hi = raw["cache_mes_mv"]
    ms_lo, ms_hi = raw["cache_mes_sv"]
    hm_lo, hm_hi = raw["cache_hmd_mv"]
    hs_lo, hs_hi = raw["cache_hmd_sv"]
    tm_lo, tm_hi = raw["offload_mes"]
    tc_lo, tc_hi = raw["offload_cloud"]

    t_loc = ctx.t_loc[:, None]
    t_mes = ctx.t_mes[:, None]

    local_lat = np.where(hm_lo == 1, t_loc,
                         np.where(hs_hi == 1, 0.0,
                                  np.where(hm_hi == 1, t_loc, _INF)))
    mes_extra = np.where(mm_lo == 1, t_mes,
                         np.where(ms_hi == 1, 0.0,
                                  np.where(mm_hi == 1, t_mes, _INF)))
    mes_opt = ctx.tx_bound + mes_extra[:, :, None]
    cloud_opt = ctx.tx_bound + ctx.tau_b

    forced_sum = (np.where(tm_lo == 1, mes_opt, 0.0).sum(axis=1)
                  + np.where(tc_lo == 1, cloud_opt, 0.0).sum(axis=1))
    n_forced = tm_lo.sum(axis=1) + tc_lo.sum(axis=1)

    opts = np.concatenate([
        local_lat[:, None, :],
        np.where(tm_hi == 1, mes_opt, _INF),
        np.where(tc_hi == 1, cloud_opt, _INF),
    ], axis=1)                                   # (N, 1 + 2M, U)
    min1 = opts.min(axis=1)
    argmin1 = opts.argmin(axis=1)
    part = np.partition(opts, 1, axis=1)
    min2 = part[:, 1, :]

    contrib = np.where(n_forced >= 1, forced_sum, min1)
    weighted = ctx.q[:, None] * contrib
    lower = _INF if np.isinf(contrib).any() else float(weighted.sum())
    rel = {
        "local_lat": local_lat, "mes_extra": mes_extra, "mes_opt": mes_opt,
        "cloud_opt": cloud_opt, "forced_sum": forced_sum, "n_forced": n_forced,
        "opts": opts, "min1": min1, "argmin1": argmin1, "min2": min2,
        "contrib": contrib, "lower": lower,
    }
    if lower == _INF:
        rel["lower_corrected"] = lower
    else:
        rel["lower_corrected"] = lower + _capacity_correction(ctx, raw, rel) \
            + _forced_budget_correction(ctx, raw)
    return rel


def _forced_budget_correction(ctx: SolverContext, raw) -> float:
    """Tightens forced-offload transmission delays with the SBS budget.

    The per-request bound prices every link at its full-budget isolated
    rate; once an SBS carries several forced offloads its budget must be
    split, so the sum of those links' transmission delays has a higher
    floor.  In grid power mode the split is enumerated exactly over the
    grid; in continuous mode monotone interval bounds over the split keep
    the result a valid lower bound.  Pinned mode prices exactly already.
    """
    cfg = ctx.cfg
    if cfg.power_mode == "pinned":
        return 0.0
    s = ctx.scenario
    forced = raw["offload_mes"][0] + raw["offload_cloud"][0]
    if not forced.any():
        return 0.0
    per_task = ctx.q * s.sv_ratio * ctx.mv
    demand = np.tensordot(per_task, forced, axes=(0, 0))   # (M, U)
    w_hz, n0, p_total = s.bandwidth_per_hmd, s.noise_power, s.total_power
    links = np.nonzero(demand > 0)
    base = float((demand[links]
                  / (w_hz * np.log2(1.0 + p_total * s.channel_gain[links] / n0))).sum())

    if cfg.power_mode == "grid":
        # exact joint floor: a real completion only adds links, hence only
        # more interference and tighter budget shares
        try:
            joint, _ = grid_min_weighted_delay(s, demand, cfg.power_levels,
                                               cfg.grid_combo_cap)
        except ValueError:
            return 0.0
        if not math.isfinite(joint):
            return _INF
        return max(0.0, joint - base)

    # continuous mode: per-SBS monotone interval bounds on the budget split
    # (interference-free, so still a valid floor)
    total = 0.0
    for m in range(ctx.m):
        us = np.nonzero(demand[m] > 0)[0]
        if us.size != 2:
            continue
        h = s.channel_gain[m, us]
        d = demand[m, us]

        def delay(k, p):
            if p <= 0:
                return _INF
            return d[k] / (w_hz * math.log2(1.0 + p * h[k] / n0))

        pair_base = delay(0, p_total) + delay(1, p_total)
        grid = np.linspace(0.0, p_total, 33)
        joint = _INF
        for j in range(len(grid) - 1):
            joint = min(joint, delay(0, grid[j + 1]) + delay(1, p_total - grid[j]))
        if math.isfinite(joint):
            total += max(0.0, joint - pair_base)
        else:
            return _INF
    return total


def _fractional_keep(items: list[tuple[float, float]], capacity: float) -> float:
    """Fractional-knapsack maximum of kept bump costs within capacity.

    Overestimates the best integral keep-set, which keeps the derived
    objective correction a valid lower bound.
    """
    if capacity <= 0:
        return 0.0
    items = sorted(items, key=lambda it: -(it[1] / it[0]))
    kept = 0.0
    for bits, extra in items:
        if bits <= capacity:
            capacity -= bits
            kept += extra
        else:
            kept += extra * (capacity / bits)
            break
    return kept


_EXACT_NODE_ITEMS = 6      # enumerate 3^k version assignments up to this k


def _node_correction_exact(cap, item_ids, bits_mv, bits_sv, cost_mv, cost_sv,
                           cost_out, base):
    """Exact per-node lower-bound correction by enumerating versions.

    Each listed viewpoint is cached here as MV, SV, or not at all; cached
    pairs may still take an outside path if that is cheaper, uncached ones
    must.  Returns min over fitting assignments of the node cost minus the
    unconstrained base (nonnegative).
    """
    k = len(item_ids)
    best = _INF
    for assign in itertools.product((0, 1, 2), repeat=k):
        bits = 0.0
        cost = 0.0
        ok = True
        for j, a in enumerate(assign):
            i = item_ids[j]
            if a == 0:
                cost += cost_out[i]
                if not np.isfinite(cost):
                    ok = False
                    break
            elif a == 1:
                if bits_mv[i] is None:
                    ok = False
                    break
                bits += bits_mv[i]
                cost += min(cost_mv[i], cost_out[i])
            else:
                if bits_sv[i] is None:
                    ok = False
                    break
                bits += bits_sv[i]
                cost += min(cost_sv[i], cost_out[i])
        if ok and bits <= cap and cost < best:
            best = cost
    return max(0.0, best - base)


def _capacity_correction(ctx: SolverContext, raw, rel) -> float:
    """Sound tightening of the per-request bound using node capacities.

    The relaxation lets every request claim its best path independently,
    so one cache slot can be 'used' by many viewpoints at once and a pair
    can enjoy SV speed at MV footprint.  Per node, the viewpoints whose
    best path runs through it must share its capacity: small nodes are
    corrected by exact version enumeration, large or partially-pinned ones
    by a fractional-knapsack bound on avoided path jumps.
    """
    free = rel["n_forced"] == 0
    argmin1 = rel["argmin1"]
    min1, min2 = rel["min1"], rel["min2"]
    q, mv = ctx.q, ctx.mv
    sv = ctx.scenario.sv_ratio * mv
    hm_lo, hm_hi = raw["cache_hmd_mv"]
    hs_lo, hs_hi = raw["cache_hmd_sv"]
    mm_lo, mm_hi = raw["cache_mes_mv"]
    ms_lo, ms_hi = raw["cache_mes_sv"]
    correction = 0.0

    for u in range(ctx.u):
        ids = [int(i) for i in np.nonzero(free[:, u] & (argmin1[:, u] == 0))[0]]
        if not ids:
            continue
        cap = float(ctx.scenario.hmd_cache_bits[u]
                    - ((hm_lo[:, u] * mv) + (hs_lo[:, u] * sv)).sum())
        if cap < 0:
            return _INF
        pinned = any(hm_lo[i, u] or hs_lo[i, u] for i in ids)
        if not pinned and len(ids) <= _EXACT_NODE_ITEMS:
            correction += _node_correction_exact(
                cap, ids,
                {i: float(mv[i]) if hm_hi[i, u] == 1 else None for i in ids},
                {i: float(sv[i]) if hs_hi[i, u] == 1 else None for i in ids},
                {i: q[i] * ctx.t_loc[i] for i in ids},
                {i: 0.0 for i in ids},
                {i: q[i] * min2[i, u] for i in ids},
                base=sum(q[i] * min1[i, u] for i in ids))
        else:
            items = []
            must = 0.0
            for i in ids:
                if hm_lo[i, u] or hs_lo[i, u]:
                    continue
                bits = sv[i] if rel["local_lat"][i, u] == 0.0 else (
                    mv[i] if hm_hi[i, u] == 1 else sv[i])
                extra = q[i] * (min2[i, u] - min1[i, u])
                if not np.isfinite(extra):
                    must += bits
                elif extra > 0:
                    items.append((float(bits), float(extra)))
            cap -= must
            if cap < 0:
                return _INF
            total = sum(e for _, e in items)
            correction += max(0.0, total - _fractional_keep(items, cap))

    for m in range(ctx.m):
        users_of = {}
        for i in range(ctx.n):
            us = np.nonzero(free[i, :] & (argmin1[i, :] == 1 + m))[0]
            if us.size:
                users_of[int(i)] = us
        if not users_of:
            continue
        cap = float(ctx.scenario.mes_cache_bits[m]
                    - ((mm_lo[:, m] * mv) + (ms_lo[:, m] * sv)).sum())
        if cap < 0:
            return _INF
        ids = sorted(users_of)
        pinned = any(mm_lo[i, m] or ms_lo[i, m] for i in ids)
        excl = np.where(rel["argmin1"] == 1 + m, rel["min2"], rel["min1"])
        if not pinned and len(ids) <= _EXACT_NODE_ITEMS:
            correction += _node_correction_exact(
                cap, ids,
                {i: float(mv[i]) if mm_hi[i, m] == 1 else None for i in ids},
                {i: float(sv[i]) if ms_hi[i, m] == 1 else None for i in ids},
                {i: float(sum(q[i] * (ctx.tx_bound[i, m, u] + ctx.t_mes[i])
                              for u in users_of[i])) for i in ids},
                {i: float(sum(q[i] * ctx.tx_bound[i, m, u]
                              for u in users_of[i])) for i in ids},
                {i: float(sum(q[i] * excl[i, u] for u in users_of[i]))
                 for i in ids},
                base=float(sum(q[i] * min1[i, u]
                               for i in ids for u in users_of[i])))
        else:
            items = []
            must = 0.0
            for i in ids:
                if mm_lo[i, m] or ms_lo[i, m]:
                    continue
                extra = 0.0
                bad = False
                for u in users_of[i]:
                    jump = q[i] * (min2[i, u] - min1[i, u])
                    if not np.isfinite(jump):
                        bad = True
                        break
                    extra += jump
                bits = mv[i] if mm_hi[i, m] == 1 else sv[i]
                if bad:
                    must += bits
                elif extra > 0:
                    items.append((float(bits), float(extra)))
            cap -= must
            if cap < 0:
                return _INF
            total = sum(e for _, e in items)
            correction += max(0.0, total - _fractional_keep(items, cap))
    return correction


def _min_excluding(rel, option_index) -> np.ndarray:
    """Per-pair option minimum with one option column removed."""
    mask = rel["argmin1"] == option_index
    return np.where(mask, rel["min2"], rel["min1"])


# --- reduce ---------------------------------------------------------------

def reduce_box(box: Box, incumbent: float, ctx: SolverContext) -> Box | None:
    """Shrink a box to the coordinate values that can still beat the incumbent.

    Eliminates a value when every completion using it violates a structural
    constraint (cache capacity, offload exclusivity, offload/cache and
    serve-every-request coupling) or when the relaxed lower bound with that
    value fixed strictly exceeds the incumbent.  Repeats to a fixpoint;
    returns None when some coordinate loses both values or the whole box's
    bound exceeds the incumbent.
    """
    raw = ctx.raw_bounds(box)
    q = ctx.q
    mv, alpha = ctx.mv, ctx.scenario.sv_ratio
    cap_mes = ctx.scenario.mes_cache_bits
    cap_hmd = ctx.scenario.hmd_cache_bits
    cap_tol = 1e-9

    for _ in range(200):
        changed = False
        mm_lo, mm_hi = raw["cache_mes_mv"]
        ms_lo, ms_hi = raw["cache_mes_sv"]
        hm_lo, hm_hi = raw["cache_hmd_mv"]
        hs_lo, hs_hi = raw["cache_hmd_sv"]
        tm_lo, tm_hi = raw["offload_mes"]
        tc_lo, tc_hi = raw["offload_cloud"]

        def shrink(hi, mask):
            nonlocal changed
            if mask.any():
                hi[mask] = 0
                changed = True

        def force(lo, mask):
            nonlocal changed
            if mask.any():
                lo[mask] = 1
                changed = True

        # eq1: never both servers for the same (i, m, u)
        if np.any((tm_lo == 1) & (tc_lo == 1)):
            return None
        shrink(tc_hi, (tm_lo == 1) & (tc_hi == 1))
        shrink(tm_hi, (tc_lo == 1) & (tm_hi == 1))

        # eq2 / eq3: at most one MES (cloud) offload per pair
        for lo, hi in ((tm_lo, tm_hi), (tc_lo, tc_hi)):
            per_pair = lo.sum(axis=1)
            if np.any(per_pair > 1):
                return None
            has_forced = (per_pair == 1)[:, None, :]
            shrink(hi, has_forced & (hi == 1) & (lo == 0))

        # eq11: MES offload needs a cacheable version at that MES
        cacheless = (mm_hi == 0) & (ms_hi == 0)                    # (N, M)
        if np.any(cacheless[:, :, None] & (tm_lo == 1)):
            return None
        shrink(tm_hi, cacheless[:, :, None] & (tm_hi == 1))
        forced_here = tm_lo.sum(axis=2) >= 1                       # (N, M)
        force(mm_lo, forced_here & (ms_hi == 0) & (mm_hi == 1) & (mm_lo == 0))
        force(ms_lo, forced_here & (mm_hi == 0) & (ms_hi == 1) & (ms_lo == 0))

        # eq13: every pair keeps at least one possible serving path
        avail = tm_hi.sum(axis=1) + tc_hi.sum(axis=1) + hm_hi + hs_hi
        if np.any(avail == 0):
            return None
        satisfied = (tm_lo.sum(axis=1) + tc_lo.sum(axis=1) + hm_lo + hs_lo) >= 1
        lone = ~satisfied & (avail == 1)                           # (N, U)
        if lone.any():
            force(hm_lo, lone & (hm_hi == 1))
            force(hs_lo, lone & (hs_hi == 1))
            force(tm_lo, lone[:, None, :] & (tm_hi == 1) & (tm_lo == 0))
            force(tc_lo, lone[:, None, :] & (tc_hi == 1) & (tc_lo == 0))

        # eq4 / eq5: committed cache bits cannot exceed capacity
        for (lo_mv, hi_mv, lo_sv, hi_sv, cap) in (
                (mm_lo, mm_hi, ms_lo, ms_hi, cap_mes),
                (hm_lo, hm_hi, hs_lo, hs_hi, cap_hmd)):
            base = ((lo_mv + alpha * lo_sv) * mv[:, None]).sum(axis=0)  # per node
            if np.any(base > cap * (1 + cap_tol) + cap_tol):
                return None
            head = cap - base
            shrink(hi_mv, (lo_mv == 0) & (hi_mv == 1)
                   & (mv[:, None] > head[None, :] * (1 + cap_tol) + cap_tol))
            shrink(hi_sv, (lo_sv == 0) & (hi_sv == 1)
                   & (alpha * mv[:, None] > head[None, :] * (1 + cap_tol) + cap_tol))

        # bound-based eliminations against the incumbent (eliminations use
        # the uncorrected per-request bound their deltas are derived from)
        if np.isfinite(incumbent):
            rel = _relaxed(ctx, raw)
            if rel["lower_corrected"] > incumbent:
                return None
            if np.isfinite(rel["lower"]):
                lb0 = rel["lower"]
                contrib = rel["contrib"]
                n_forced = rel["n_forced"]
                forced_sum = rel["forced_sum"]
                qcol = q[:, None]

                m_count = ctx.m
                free_pair = (n_forced == 0)

                # offload coordinates: value 1 adds a forced path, value 0
                # removes one option (second-minimum fallback).
                for name, opt_vals, opt_base in (
                        ("offload_mes", rel["mes_opt"], 1),
                        ("offload_cloud", rel["cloud_opt"], 1 + m_count)):
                    lo, hi = raw[name]
                    und = (lo == 0) & (hi == 1)
                    if und.any():
                        new1 = forced_sum[:, None, :] + opt_vals
                        delta1 = new1 - contrib[:, None, :]
                        lb_if1 = lb0 + (q[:, None, None] * delta1)
                        shrink(hi, und & (lb_if1 > incumbent))

                        idx = np.arange(m_count)[None, :, None] + opt_base
                        excl = np.where(rel["argmin1"][:, None, :] == idx,
                                        rel["min2"][:, None, :],
                                        rel["min1"][:, None, :])
                        delta0 = np.where(free_pair[:, None, :],
                                          excl - contrib[:, None, :], 0.0)
                        lb_if0 = lb0 + q[:, None, None] * delta0
                        force(lo, und & (lo == 0) & (lb_if0 > incumbent))

                # HMD cache coordinates: only the local option changes.
                excl_local = _min_excluding(rel, 0)
                t_loc = ctx.t_loc[:, None]

                def pair_lb(new_local):
                    new_c = np.where(n_forced >= 1, forced_sum,
                                     np.minimum(excl_local, new_local))
                    return lb0 + (qcol * (new_c - contrib))

                hm_lo, hm_hi = raw["cache_hmd_mv"]
                hs_lo, hs_hi = raw["cache_hmd_sv"]
                und = (hs_lo == 0) & (hs_hi == 1)
                if und.any():
                    local0 = np.where(hm_hi == 1, t_loc, _INF)
                    force(hs_lo, und & (pair_lb(local0) > incumbent))
                und = (hm_lo == 0) & (hm_hi == 1)
                if und.any():
                    local1 = np.broadcast_to(t_loc, hm_lo.shape)
                    shrink(hm_hi, und & (pair_lb(local1) > incumbent))
                    local0 = np.where(hs_hi == 1, 0.0, _INF)
                    force(hm_lo, und & (pair_lb(local0) > incumbent))

                # MES cache coordinates: the MES option column at (i, m)
                # changes for every HMD at once; forced pairs shift their
                # forced sum, free pairs re-minimize.
                tm_lo, tm_hi = raw["offload_mes"]
                t_mes = ctx.t_mes[:, None]
                idx_mes = np.arange(m_count)[None, :, None] + 1
                excl_mes = np.where(rel["argmin1"][:, None, :] == idx_mes,
                                    rel["min2"][:, None, :],
                                    rel["min1"][:, None, :])      # (N, M, U)

                def mes_lb(new_extra):
                    # inf - inf can appear at positions the where() masks out
                    with np.errstate(invalid="ignore"):
                        new_opt = ctx.tx_bound + new_extra[:, :, None]
                        forced_pair = tm_lo == 1
                        opt_pair = (tm_hi == 1) & ~forced_pair & free_pair[:, None, :]
                        new_c = np.where(
                            forced_pair,
                            (forced_sum[:, None, :] - rel["mes_opt"] + new_opt),
                            np.where(opt_pair,
                                     np.minimum(excl_mes, new_opt),
                                     contrib[:, None, :]))
                        delta = (q[:, None, None] * (new_c - contrib[:, None, :]))
                        return lb0 + np.where(np.isnan(delta), 0.0, delta).sum(axis=2)

                mm_lo, mm_hi = raw["cache_mes_mv"]
                ms_lo, ms_hi = raw["cache_mes_sv"]
                und = (mm_lo == 0) & (mm_hi == 1)
                if und.any():
                    extra1 = np.broadcast_to(t_mes, mm_lo.shape)
                    shrink(mm_hi, und & (mes_lb(extra1) > incumbent))
                    extra0 = np.where(ms_hi == 1, 0.0, _INF)
                    force(mm_lo, und & (mes_lb(extra0) > incumbent))
                und = (ms_lo == 0) & (ms_hi == 1)
                if und.any():
                    extra0 = np.where(mm_hi == 1, t_mes, _INF)
                    force(ms_lo, und & (mes_lb(extra0) > incumbent))

        # conflicting eliminations mean some coordinate lost both values
        for name, _ in _BLOCKS:
            lo, hi = raw[name]
            if np.any(lo > hi):
                return None
        if not changed:
            break

    out = ctx.box_from_raw(raw, box)
    rel = _relaxed(ctx, raw)
    if rel["lower_corrected"] == _INF:
        return None  # some pair (or node capacity) has no finite completion
    if np.isfinite(incumbent) and rel["lower_corrected"] > incumbent:
        return None
    out.lower_bound = max(box.lower_bound, rel["lower_corrected"])
    return out


# --- completions ----------------------------------------------------------

def _forced_offloads(raw) -> tuple[np.ndarray, np.ndarray]:
    return raw["offload_mes"][0].copy(), raw["offload_cloud"][0].copy()


def _pair_options(ctx, raw, i, u):
    """Serving options for pair (i, u) inside a box: encoded 0 = local,
    1 + m = MES m, 1 + M + m = cloud via m."""
    opts = []
    hm_hi = raw["cache_hmd_mv"][1]
    hs_hi = raw["cache_hmd_sv"][1]
    mm_hi = raw["cache_mes_mv"][1]
    ms_hi = raw["cache_mes_sv"][1]
    tm_hi = raw["offload_mes"][1]
    tc_hi = raw["offload_cloud"][1]
    if hm_hi[i, u] == 1 or hs_hi[i, u] == 1:
        opts.append(0)
    for m in range(ctx.m):
        if tm_hi[i, m, u] == 1 and (mm_hi[i, m] == 1 or ms_hi[i, m] == 1):
            opts.append(1 + m)
    for m in range(ctx.m):
        if tc_hi[i, m, u] == 1:
            opts.append(1 + ctx.m + m)
    return opts


def _assignment_to_offloads(ctx, raw, choice: dict) -> tuple[np.ndarray, np.ndarray]:
    off_m, off_c = _forced_offloads(raw)
    for (i, u), opt in choice.items():
        if opt == 0:
            continue
        if opt <= ctx.m:
            off_m[i, opt - 1, u] = 1
        else:
            off_c[i, opt - 1 - ctx.m, u] = 1
    return off_m, off_c


def _greedy_assignment(ctx, raw, tx_est=None, rng=None,
                       noise=0.3) -> tuple[np.ndarray, np.ndarray] | None:
    """Latency-greedy serving choice per pair.

    Pairs are visited in decreasing popularity-weighted size; each takes
    its cheapest estimated option that still fits a running capacity
    commitment (minimal cacheable footprint per node).  tx_est overrides
    the context's transmission-delay estimate, e.g. with delays from an
    actual allocation when refining.  With rng given, option costs are
    jittered multiplicatively to diversify restarts while staying
    capacity-aware (uniform random completions are almost never
    cache-feasible on dense instances).
    """
    s = ctx.scenario
    if tx_est is None:
        tx_est = ctx.tx_est
    if rng is not None:
        tx_est = tx_est * rng.uniform(1.0 - noise, 1.0 + noise, tx_est.shape)
    tm_lo = raw["offload_mes"][0]
    tc_lo = raw["offload_cloud"][0]
    hm_lo, hm_hi = raw["cache_hmd_mv"]
    hs_lo, hs_hi = raw["cache_hmd_sv"]
    mm_lo, mm_hi = raw["cache_mes_mv"]
    ms_lo, ms_hi = raw["cache_mes_sv"]

    cap_m = cap_mes_commit(ctx, raw)
    cap_u = cap_hmd_commit(ctx, raw)
    # entries the box already caches cost no extra capacity
    committed = (mm_lo == 1) | (ms_lo == 1)
    for i, m in zip(*np.nonzero(tm_lo.sum(axis=2) >= 1)):
        if not committed[i, m]:
            committed[i, m] = True
            cap_m[m] -= ctx.mv[i] if mm_hi[i, m] == 1 else s.sv_ratio * ctx.mv[i]

    order = sorted(((i, u) for i in range(ctx.n) for u in range(ctx.u)),
                   key=lambda p: (-ctx.q[p[0]] * ctx.mv[p[0]], p[0], p[1]))
    choice: dict[tuple[int, int], int] = {}
    for (i, u) in order:
        if tm_lo[i, :, u].any() or tc_lo[i, :, u].any():
            continue  # already served by a forced offload
        best, best_cost = None, _INF
        if hm_lo[i, u] == 1:
            best, best_cost = 0, ctx.t_loc[i]      # MV projection is charged
        elif hs_lo[i, u] == 1:
            best, best_cost = 0, 0.0
        elif hs_hi[i, u] == 1 and s.sv_ratio * ctx.mv[i] <= cap_u[u]:
            best, best_cost = 0, 0.0
        elif hm_hi[i, u] == 1 and ctx.mv[i] <= cap_u[u]:
            best, best_cost = 0, ctx.t_loc[i]
        for m in range(ctx.m):
            if raw["offload_mes"][1][i, m, u] != 1:
                continue
            if mm_hi[i, m] == 0 and ms_hi[i, m] == 0:
                continue
            need = 0.0 if committed[i, m] else (
                ctx.mv[i] if mm_hi[i, m] == 1 else s.sv_ratio * ctx.mv[i])
            if need > cap_m[m]:
                continue
            cost = tx_est[i, m, u] + (0.0 if ms_hi[i, m] == 1 else ctx.t_mes[i])
            if cost < best_cost:
                best, best_cost = 1 + m, cost
        for m in range(ctx.m):
            if raw["offload_cloud"][1][i, m, u] != 1:
                continue
            cost = tx_est[i, m, u] + ctx.tau_b
            if cost < best_cost:
                best, best_cost = 1 + ctx.m + m, cost
        if best is None:
            opts = _pair_options(ctx, raw, i, u)
            if not opts:
                return None
            best = opts[-1]  # fall back to the last option (cloud-most)
        choice[(i, u)] = best
        if best == 0:
            if hm_lo[i, u] == 0 and hs_lo[i, u] == 0:   # newly cached
                cap_u[u] -= s.sv_ratio * ctx.mv[i] if hs_hi[i, u] == 1 \
                    else ctx.mv[i]
        elif best <= ctx.m and not committed[i, best - 1]:
            m = best - 1
            committed[i, m] = True
            cap_m[m] -= ctx.mv[i] if mm_hi[i, m] == 1 else s.sv_ratio * ctx.mv[i]
    return _assignment_to_offloads(ctx, raw, choice)


def cap_mes_commit(ctx, raw) -> np.ndarray:
    mm_lo = raw["cache_mes_mv"][0]
    ms_lo = raw["cache_mes_sv"][0]
    used = ((mm_lo + ctx.scenario.sv_ratio * ms_lo) * ctx.mv[:, None]).sum(axis=0)
    return ctx.scenario.mes_cache_bits - used


def cap_hmd_commit(ctx, raw) -> np.ndarray:
    hm_lo = raw["cache_hmd_mv"][0]
    hs_lo = raw["cache_hmd_sv"][0]
    used = ((hm_lo + ctx.scenario.sv_ratio * hs_lo) * ctx.mv[:, None]).sum(axis=0)
    return ctx.scenario.hmd_cache_bits - used


def _coverage_assignment(ctx, raw, tx_est=None, rng=None,
                         noise=0.3) -> tuple[np.ndarray, np.ndarray] | None:
    """Coverage-first serving choice: one cached copy per viewpoint.

    Viewpoints are taken in popularity order; each picks the single MES
    whose unserved users reach it cheapest (subject to box and capacity)
    and routes all of them there, so edge capacity buys distinct coverage
    rather than replicas.  Pairs that fit nowhere fall back to the cloud
    via their cheapest link.  rng jitters costs as in _greedy_assignment.
    """
    s = ctx.scenario
    if tx_est is None:
        tx_est = ctx.tx_est
    if rng is not None:
        tx_est = tx_est * rng.uniform(1.0 - noise, 1.0 + noise, tx_est.shape)
    tm_lo = raw["offload_mes"][0]
    tm_hi = raw["offload_mes"][1]
    tc_lo = raw["offload_cloud"][0]
    tc_hi = raw["offload_cloud"][1]
    hm_lo, hm_hi = raw["cache_hmd_mv"]
    hs_lo, hs_hi = raw["cache_hmd_sv"]
    mm_lo, mm_hi = raw["cache_mes_mv"]
    ms_lo, ms_hi = raw["cache_mes_sv"]

    cap_m = cap_mes_commit(ctx, raw)
    cap_u = cap_hmd_commit(ctx, raw)
    committed = (mm_lo == 1) | (ms_lo == 1)
    for i, m in zip(*np.nonzero(tm_lo.sum(axis=2) >= 1)):
        if not committed[i, m]:
            committed[i, m] = True
            cap_m[m] -= ctx.mv[i] if mm_hi[i, m] == 1 else s.sv_ratio * ctx.mv[i]

    choice: dict[tuple[int, int], int] = {}
    order = sorted(range(ctx.n), key=lambda i: (-ctx.q[i] * ctx.mv[i], i))
    for i in order:
        pending = []
        for u in range(ctx.u):
            if tm_lo[i, :, u].any() or tc_lo[i, :, u].any():
                continue
            if hm_lo[i, u] == 1:
                choice[(i, u)] = 0
                continue
            if hs_lo[i, u] == 1:
                choice[(i, u)] = 0
                continue
            if hs_hi[i, u] == 1 and s.sv_ratio * ctx.mv[i] <= cap_u[u]:
                choice[(i, u)] = 0
                cap_u[u] -= s.sv_ratio * ctx.mv[i]
                continue
            pending.append(u)
        if not pending:
            continue
        best_m, best_cost = -1, _INF
        for m in range(ctx.m):
            if mm_hi[i, m] == 0 and ms_hi[i, m] == 0:
                continue
            need = 0.0 if committed[i, m] else (
                ctx.mv[i] if mm_hi[i, m] == 1 else s.sv_ratio * ctx.mv[i])
            if need > cap_m[m]:
                continue
            cost = 0.0
            usable = True
            for u in pending:
                if tm_hi[i, m, u] != 1:
                    usable = False
                    break
                cost += tx_est[i, m, u]
            if usable and cost < best_cost:
                best_m, best_cost = m, cost
        if best_m >= 0:
            if not committed[i, best_m]:
                committed[i, best_m] = True
                cap_m[best_m] -= ctx.mv[i] if mm_hi[i, best_m] == 1 \
                    else s.sv_ratio * ctx.mv[i]
            for u in pending:
                choice[(i, u)] = 1 + best_m
        else:
            for u in pending:
                clouds = [(ctx.tx_est[i, m, u], m) for m in range(ctx.m)
                          if tc_hi[i, m, u] == 1]
                if clouds:
                    choice[(i, u)] = 1 + ctx.m + min(clouds)[1]
                else:
                    opts = _pair_options(ctx, raw, i, u)
                    if not opts:
                        return None
                    choice[(i, u)] = opts[-1]
    return _assignment_to_offloads(ctx, raw, choice)


def _random_assignment(ctx, raw, rng) -> tuple[np.ndarray, np.ndarray] | None:
    """Uniform random serving choice per pair among the box's options."""
    tm_lo = raw["offload_mes"][0]
    tc_lo = raw["offload_cloud"][0]
    choice = {}
    for i in range(ctx.n):
        for u in range(ctx.u):
            if tm_lo[i, :, u].any() or tc_lo[i, :, u].any():
                continue
            opts = _pair_options(ctx, raw, i, u)
            if not opts:
                return None
            choice[(i, u)] = opts[int(rng.integers(len(opts)))]
    return _assignment_to_offloads(ctx, raw, choice)


def _complete(ctx: SolverContext, raw, off_m, off_c):
    """Finish an offload assignment with greedy caching and power; returns
    (objective value, Decision) or None when infeasible."""
    from . import baselines
    cfg = ctx.cfg
    floors = (raw["cache_mes_mv"][0], raw["cache_mes_sv"][0],
              raw["cache_hmd_mv"][0], raw["cache_hmd_sv"][0])
    ceils = (raw["cache_mes_mv"][1], raw["cache_mes_sv"][1],
             raw["cache_hmd_mv"][1], raw["cache_hmd_sv"][1])
    dec = baselines.greedy_cache_power(
        ctx.scenario, off_m, off_c,
        cache_floor=floors, cache_ceil=ceils,
        power_mode=cfg.power_mode, power_levels=cfg.power_levels,
        pinned_power=cfg.pinned_power,
        power_rel_epsilon=cfg.bound_power_rel_epsilon,
        grid_combo_cap=cfg.grid_combo_cap)
    if dec is None:
        return None
    return objective(ctx.scenario, dec), dec


def bound(box: Box, ctx: SolverContext, cfg: SolverConfig | None = None,
          root: bool = False):
    """Lower and upper bounds for a reduced box.

    Lower: per-request best-path relaxation at the box's optimistic vertex.
    Upper: best feasible completion among a deterministic greedy assignment
    (plus nearest-association at the root) and `restarts` uniform random
    assignments, each finished by greedy caching and the inner power
    solver.  A fully decided box is evaluated exactly.
    """
    cfg = cfg or ctx.cfg
    raw = ctx.raw_bounds(box)
    rel = _relaxed(ctx, raw)
    lower = max(rel["lower_corrected"], box.lower_bound)
    if lower == _INF:
        return _INF, _INF, None

    if box.undecided_count() == 0:
        off_m, off_c = _forced_offloads(raw)
        got = _complete(ctx, raw, off_m, off_c)
        if got is None:
            return lower, _INF, None
        value, dec = got
        return value, value, dec

    candidates = []
    full = root or not cfg.lean_children
    assignment = _greedy_assignment(ctx, raw)
    if assignment is not None:
        candidates.append(assignment)
    if full:
        assignment = _greedy_assignment(ctx, raw, tx_est=ctx.tx_est_optimistic)
        if assignment is not None:
            candidates.append(assignment)
        for tx in (None, ctx.tx_est_optimistic):
            assignment = _coverage_assignment(ctx, raw, tx_est=tx)
            if assignment is not None:
                candidates.append(assignment)
    if root:
        if cfg.seed_completions:
            from . import baselines
            for rank in ("popularity", "density", "knapsack"):
                near = baselines.nearest_offload_assignment(ctx.scenario,
                                                            rank=rank)
                if near is not None:
                    candidates.append(near)
        # jittered constructive restarts: feasible by construction, so they
        # actually diversify where uniform draws cannot
        jrng = np.random.default_rng([cfg.seed, 1_000_003])
        for r in range(cfg.root_restarts):
            maker = _greedy_assignment if r % 2 == 0 else _coverage_assignment
            tx = ctx.tx_est if r % 4 < 2 else ctx.tx_est_optimistic
            assignment = maker(ctx, raw, tx_est=tx, rng=jrng)
            if assignment is not None:
                candidates.append(assignment)
    rng = np.random.default_rng([cfg.seed, box.box_id])
    for _ in range(cfg.restarts):
        assignment = _random_assignment(ctx, raw, rng)
        if assignment is not None:
            candidates.append(assignment)

    best_value, best_dec = _INF, None
    seen = set()
    for off_m, off_c in candidates:
        key = (off_m.tobytes(), off_c.tobytes())
        if key in seen:
            continue
        seen.add(key)
        got = _complete(ctx, raw, off_m, off_c)
        if got is None:
            continue
        value, dec = got
        if value < best_value:
            best_value, best_dec = value, dec

    # Refinement: redo the constructive choices with the transmission
    # delays the best completion actually achieved, pricing congestion in.
    rounds = cfg.refine_rounds if (full and best_dec is not None) else 0
    for _ in range(rounds):
        rates = rate_matrix(ctx.scenario, best_dec.power.p)
        tx_ref = ctx._tx_from_rates(rates)
        tx_ref = np.where(np.isfinite(tx_ref), tx_ref, ctx.tx_est)
        improved = False
        for maker in (_greedy_assignment, _coverage_assignment):
            assignment = maker(ctx, raw, tx_est=tx_ref)
            if assignment is None:
                continue
            key = (assignment[0].tobytes(), assignment[1].tobytes())
            if key in seen:
                continue
            seen.add(key)
            got = _complete(ctx, raw, *assignment)
            if got is not None and got[0] < best_value:
                best_value, best_dec = got
                improved = True
        if not improved:
            break
    return lower, best_value, best_dec


def _local_polish(ctx: SolverContext, raw, value: float, dec: Decision,
                  tries: int = 12):
    """Steepest-descent pass of single-pair serving moves.

    Candidate moves per pair: onto an MES copy the decision already
    caches, onto a fresh MES or local cache entry that still fits, or to
    the cheapest cloud link; moves are ranked by their estimated gain
    under the achieved rates, then the top ones are re-completed one at a
    time and the first exact improvement is kept.  Box bounds stay
    respected.
    """
    s = ctx.scenario
    rates = rate_matrix(s, dec.power.p)
    tx_act = ctx._tx_from_rates(rates)
    tx_opt = np.where(np.isfinite(tx_act), tx_act, ctx.tx_est_optimistic)
    tm_lo, tm_hi = raw["offload_mes"]
    tc_lo, tc_hi = raw["offload_cloud"]
    hm_hi = raw["cache_hmd_mv"][1]
    hs_hi = raw["cache_hmd_sv"][1]
    mm_hi = raw["cache_mes_mv"][1]

    mv, sv = ctx.mv, s.sv_ratio * ctx.mv
    hmd_used = ((dec.cache_hmd_mv + s.sv_ratio * dec.cache_hmd_sv)
                * mv[:, None]).sum(axis=0)
    rem_u = s.hmd_cache_bits - hmd_used
    mes_used = ((dec.cache_mes_mv + s.sv_ratio * dec.cache_mes_sv)
                * mv[:, None]).sum(axis=0)
    rem_m = s.mes_cache_bits - mes_used
    _, hmd_energy = energy_usage(s, dec)
    rem_eu = s.hmd_energy_budget - hmd_energy

    base_choice: dict[tuple[int, int], int] = {}
    moves: list[tuple[float, tuple[int, int], int]] = []
    for i in range(ctx.n):
        for u in range(ctx.u):
            if tm_lo[i, :, u].any() or tc_lo[i, :, u].any():
                continue  # forced by the box; not movable
            mes_here = np.nonzero(dec.offload_mes[i, :, u])[0]
            cloud_here = np.nonzero(dec.offload_cloud[i, :, u])[0]
            if mes_here.size:
                m0 = int(mes_here[0])
                cur = 1 + m0
                tau_cur = tx_act[i, m0, u] \
                    + (ctx.t_mes[i] if dec.cache_mes_mv[i, m0] else 0.0)
            elif cloud_here.size:
                m0 = int(cloud_here[0])
                cur = 1 + ctx.m + m0
                tau_cur = tx_act[i, m0, u] + ctx.tau_b
            else:
                cur = 0
                tau_cur = ctx.t_loc[i] if dec.cache_hmd_mv[i, u] else 0.0
            base_choice[(i, u)] = cur

            for m in range(ctx.m):
                if tm_hi[i, m, u] != 1 or (1 + m) == cur:
                    continue
                if dec.cache_mes_mv[i, m] or dec.cache_mes_sv[i, m]:
                    tau = tx_opt[i, m, u] \
                        + (ctx.t_mes[i] if dec.cache_mes_mv[i, m] else 0.0)
                elif mm_hi[i, m] == 1 and mv[i] <= rem_m[m]:
                    tau = tx_opt[i, m, u] + ctx.t_mes[i]
                else:
                    continue
                if tau < tau_cur:
                    moves.append((ctx.q[i] * (tau - tau_cur), (i, u), 1 + m))
            if cur != 0:
                if dec.cache_hmd_sv[i, u] == 1 or (
                        hs_hi[i, u] == 1 and sv[i] <= rem_u[u]):
                    if 0.0 < tau_cur:
                        moves.append((ctx.q[i] * (0.0 - tau_cur), (i, u), 0))
                elif dec.cache_hmd_mv[i, u] == 1 or (
                        hm_hi[i, u] == 1 and mv[i] <= rem_u[u]
                        and ctx.q[i] * ctx.e_hmd[i] <= rem_eu[u]):
                    if ctx.t_loc[i] < tau_cur:
                        moves.append((ctx.q[i] * (ctx.t_loc[i] - tau_cur),
                                      (i, u), 0))
            clouds = [(tx_opt[i, m, u], m) for m in range(ctx.m)
                      if tc_hi[i, m, u] == 1 and (1 + ctx.m + m) != cur]
            if clouds:
                tau_c, m_c = min(clouds)
                if tau_c + ctx.tau_b < tau_cur:
                    moves.append((ctx.q[i] * (tau_c + ctx.tau_b - tau_cur),
                                  (i, u), 1 + ctx.m + m_c))

    # Swap moves: drop a replicated copy at one MES, reroute its users to
    # another MES holding the viewpoint, and spend the freed capacity on a
    # viewpoint that is currently fetched from the cloud.  Single-pair
    # moves cannot escape replica-saturated caches; this can.
    swaps: list[tuple[float, list[tuple[tuple[int, int], int]]]] = []
    cached = (dec.cache_mes_mv + dec.cache_mes_sv) >= 1     # (N, M)
    cloud_pairs: dict[int, list[tuple[int, int]]] = {}
    for i in range(ctx.n):
        for u in range(ctx.u):
            if dec.offload_cloud[i, :, u].any() and not tc_lo[i, :, u].any():
                m0 = int(np.nonzero(dec.offload_cloud[i, :, u])[0][0])
                cloud_pairs.setdefault(i, []).append((u, m0))
    for m in range(ctx.m):
        for i0 in np.nonzero(cached[:, m])[0]:
            others = [b for b in np.nonzero(cached[i0])[0] if b != m]
            if not others:
                continue
            users = [u for u in np.nonzero(dec.offload_mes[i0, m, :])[0]
                     if not tm_lo[i0, :, u].any()]
            if dec.offload_mes[i0, m, :].sum() != len(users):
                continue  # some user is box-forced onto this copy
            reroute = []
            delta0 = 0.0
            feasible = True
            for u in users:
                tau_old = tx_act[i0, m, u] \
                    + (ctx.t_mes[i0] if dec.cache_mes_mv[i0, m] else 0.0)
                cands = [(tx_opt[i0, b, u]
                          + (ctx.t_mes[i0] if dec.cache_mes_mv[i0, b] else 0.0), b)
                         for b in others if tm_hi[i0, b, u] == 1]
                if not cands:
                    feasible = False
                    break
                tau_new, b = min(cands)
                reroute.append(((int(i0), int(u)), 1 + int(b)))
                delta0 += ctx.q[i0] * (tau_new - tau_old)
            if not feasible:
                continue
            freed = mv[i0] if dec.cache_mes_mv[i0, m] else sv[i0]
            for i1, pairs in cloud_pairs.items():
                if cached[i1, m] or mm_hi[i1, m] != 1 \
                        or mv[i1] > rem_m[m] + freed:
                    continue
                delta1 = 0.0
                takers = []
                for (u, m0) in pairs:
                    if tm_hi[i1, m, u] != 1:
                        continue
                    tau_old = tx_act[i1, m0, u] + ctx.tau_b
                    tau_new = tx_opt[i1, m, u] + ctx.t_mes[i1]
                    if tau_new < tau_old:
                        takers.append(((int(i1), int(u)), 1 + m))
                        delta1 += ctx.q[i1] * (tau_new - tau_old)
                if takers and delta0 + delta1 < 0:
                    swaps.append((delta0 + delta1, reroute + takers))

    ranked: list[tuple[float, list[tuple[tuple[int, int], int]]]] = \
        [(d, [(pair, tgt)]) for d, pair, tgt in moves] + swaps
    ranked.sort(key=lambda mo: (mo[0], mo[1]))
    for _, updates in ranked[:tries]:
        choice = dict(base_choice)
        for pair, target in updates:
            choice[pair] = target
        off_m, off_c = _assignment_to_offloads(ctx, raw, choice)
        got = _complete(ctx, raw, off_m, off_c)
        if got is not None and got[0] < value:
            return got
    return value, dec


# --- main loop -------------------------------------------------------------

def jcpt_solve(s: Scenario, cfg: SolverConfig | None = None) -> SolveResult:
    """Branch-reduce-and-bound minimization of the weighted latency sum.

    Boxes are explored best-first on their lower bound (ties by insertion
    order).  The incumbent is non-increasing, the global lower bound
    non-decreasing; the loop stops when the relative gap drops to
    `tolerance`, the box queue empties (exact), or `max_iterations` is hit.
    """
    cfg = cfg or SolverConfig()
    problems = validate_scenario(s)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))
    t0 = time.perf_counter()
    ctx = SolverContext(s, cfg)

    def result(feasible, best, incumbent, global_lb, iterations, boxes, trace,
               open_trace):
        if feasible and cfg.power_mode == "continuous" \
                and cfg.bound_power_rel_epsilon > 1e-6:
            # bounding ran the inner power solver loosely; polish the
            # winner at the solver's own tolerance (never worse: same
            # deterministic descent, more cycles)
            from .radio import allocate_power
            polished = best.copy()
            polished.power = allocate_power(s, polished.offload_mes,
                                            polished.offload_cloud)
            value = objective(s, polished)
            if value < incumbent:
                incumbent, best = value, polished
        if feasible:
            global_lb = min(global_lb, incumbent)
        return SolveResult(
            algorithm="jcpt", feasible=feasible, best_decision=best,
            best_value=incumbent if feasible else _INF,
            global_lower_bound=global_lb, iterations=iterations,
            boxes_explored=boxes, wall_time=time.perf_counter() - t0,
            bound_trace=trace, open_box_trace=open_trace)

    root = reduce_box(ctx.full_box(), _INF, ctx)
    if root is None:
        return result(False, None, _INF, _INF, 0, 0, [], [])

    lb, ub, dec = bound(root, ctx, cfg, root=True)
    incumbent, best = ub, dec
    global_lb = min(lb, incumbent)
    trace = [(global_lb, ub, incumbent)]
    boxes = 1
    heap: list = []
    counter = 0
    if root.undecided_count() > 0 and lb < incumbent:
        heapq.heappush(heap, (lb, counter, root))
        counter += 1
    open_trace = [len(heap)]

    iterations = 0
    while iterations < cfg.max_iterations:
        selected = None
        while heap:
            lb_box, _, candidate = heapq.heappop(heap)
            if lb_box < incumbent:
                selected = (lb_box, candidate)
                break
        if selected is None:
            if best is not None:
                global_lb = max(global_lb, incumbent)
            break
        lb_box, box = selected
        global_lb = max(global_lb, min(lb_box, incumbent))
        if np.isfinite(incumbent) and incumbent - global_lb <= cfg.tolerance * abs(incumbent):
            break

        iterations += 1
        und = box.undecided()
        pri = np.where(und, ctx.priority, -1.0)
        k = int(np.argmax(pri))
        child0, child1 = branch(box, k)
        f_max_iter = _INF
        for child in (child0, child1):
            child.box_id = boxes
            boxes += 1
            red = reduce_box(child, incumbent, ctx)
            if red is None:
                continue
            lb_c, ub_c, dec_c = bound(red, ctx, cfg)
            lb_c = max(lb_c, red.lower_bound)   # parent bounds stay valid
            f_max_iter = min(f_max_iter, ub_c)
            if ub_c < incumbent:
                incumbent, best = ub_c, dec_c
            if lb_c < incumbent and red.undecided_count() > 0:
                red.lower_bound = lb_c
                heapq.heappush(heap, (lb_c, counter, red))
                counter += 1
        new_floor = min(heap[0][0], incumbent) if heap else incumbent
        if np.isfinite(new_floor) or best is not None:
            global_lb = max(global_lb, min(new_floor, incumbent))
        trace.append((global_lb, f_max_iter, incumbent))
        open_trace.append(len(heap))

    if best is not None:
        root_raw = ctx.raw_bounds(root)
        for _ in range(cfg.polish_rounds):
            new_value, new_best = _local_polish(ctx, root_raw, incumbent, best)
            if new_value >= incumbent:
                break
            incumbent, best = new_value, new_best

    feasible = best is not None
    return result(feasible, best, incumbent, global_lb, iterations, boxes,
                  trace, open_trace)
