"""Benchmark strategies and the shared greedy caching/power completion.

Four baselines accompany the DBRB solver:

* NO (nearest offloading): single-SBS association, no horizontal
  collaboration; local cache first, nearest MES next, cloud last.
* PEA (power equally allocated): transmit power fixed to an equal split
  over covered HMDs, caching/offloading optimized with power pinned.
* PF (popularity first): every cache filled with the most popular
  viewpoints (SV form first), offloading and power optimized with caches
  pinned.
* LRU: caches evolve along a request trace, evicting least-recently-used
  entries; reported metrics are warm-cache trace averages.

greedy_cache_power is the completion used both by the baselines and inside
the solver's bounding step: given fixed offload tensors it picks cache
contents greedily by marginal-benefit-per-bit and solves the inner power
problem.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, replace

import numpy as np

from .model import Scenario
from .latency import Decision, check_feasibility, objective, cache_hit_ratio
from .radio import (PowerAllocation, allocate_power, equal_split_power,
                    grid_power, rate_matrix)
from .jcpt import SolveResult, SolverConfig, jcpt_solve

__all__ = [
    "DEFAULT_COVERAGE_GAIN",
    "RequestTrace",
    "generate_trace",
    "greedy_cache_power",
    "nearest_offload_assignment",
    "equal_power_matrix",
    "solve_nearest_offloading",
    "solve_power_equal",
    "solve_popularity_first",
    "solve_lru",
]

# Coverage threshold for PEA/LRU association: channel gain at 50 m under
# the default path-loss law (1e-3 * d^-3.5).
DEFAULT_COVERAGE_GAIN = 1e-3 * 50.0 ** -3.5


# --- greedy caching + power completion -----------------------------------

def _marginal_heap_entries(kind, items):
    """Entries (-ratio, kind, node, i) for the lazy upgrade queue."""
    out = []
    for (node, i, gain, extra) in items:
        if extra > 0 and gain > 0:
            out.append((-gain / extra, kind, node, i))
    return out


def greedy_cache_power(s: Scenario, offload_mes: np.ndarray,
                       offload_cloud: np.ndarray, *,
                       cache_floor=None, cache_ceil=None,
                       power_mode: str = "continuous", power_levels: int = 4,
                       pinned_power: np.ndarray | None = None,
                       power_rel_epsilon: float = 1e-6,
                       grid_combo_cap: int = 500_000) -> Decision | None:
    """Complete fixed offload tensors into a full feasible Decision.

    Every MES that serves a viewpoint must cache a version of it, and every
    pair served nowhere must be cached at its HMD; those mandatory entries
    start in MV form (smallest footprint), are upgraded to SV while an
    energy budget is violated, and finally upgraded by latency gain per
    extra bit while capacity lasts (lazy priority queue, entries
    re-validated at pop time).  cache_floor / cache_ceil pin entries that a
    search box has already decided.  Returns None when no feasible
    completion exists.
    """
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    off_m = np.asarray(offload_mes, dtype=np.int8)
    off_c = np.asarray(offload_cloud, dtype=np.int8)
    if np.any(off_m + off_c > 1) or np.any(off_m.sum(axis=1) > 1) \
            or np.any(off_c.sum(axis=1) > 1):
        raise ValueError("offload tensors violate the exclusivity constraints")

    ones = lambda shape: np.ones(shape, np.int8)
    zeros = lambda shape: np.zeros(shape, np.int8)
    if cache_floor is None:
        cache_floor = (zeros((n, m_count)), zeros((n, m_count)),
                       zeros((n, u_count)), zeros((n, u_count)))
    if cache_ceil is None:
        cache_ceil = (ones((n, m_count)), ones((n, m_count)),
                      ones((n, u_count)), ones((n, u_count)))
    mm_f, ms_f, hm_f, hs_f = [np.asarray(a, np.int8) for a in cache_floor]
    mm_c, ms_c, hm_c, hs_c = [np.asarray(a, np.int8) for a in cache_ceil]

    q, mv = s.popularity, s.mv_sizes
    alpha = s.sv_ratio
    sv = alpha * mv
    t_mes, t_loc = s.mes_compute_delay(), s.hmd_compute_delay()
    e_mes, e_hmd = s.mes_compute_energy(), s.hmd_compute_energy()

    mm, ms = mm_f.copy(), ms_f.copy()
    hm, hs = hm_f.copy(), hs_f.copy()
    used_m = ((mm + alpha * ms) * mv[:, None]).sum(axis=0).astype(float)
    used_u = ((hm + alpha * hs) * mv[:, None]).sum(axis=0).astype(float)
    cap_m, cap_u = s.mes_cache_bits, s.hmd_cache_bits
    tol = 1e-9

    def fits(used, cap, extra):
        return used + extra <= cap * (1 + tol) + tol

    if np.any(used_m > cap_m * (1 + tol) + tol) \
            or np.any(used_u > cap_u * (1 + tol) + tol):
        return None

    # mandatory entries, minimal footprint first
    cnt = off_m.sum(axis=2)                      # users served per (i, m)
    for m in range(m_count):
        for i in np.nonzero(cnt[:, m] >= 1)[0]:
            if mm[i, m] or ms[i, m]:
                continue
            if mm_c[i, m] == 1 and fits(used_m[m], cap_m[m], mv[i]):
                mm[i, m] = 1
                used_m[m] += mv[i]
            elif ms_c[i, m] == 1 and fits(used_m[m], cap_m[m], sv[i]):
                ms[i, m] = 1
                used_m[m] += sv[i]
            else:
                return None
    local = (off_m.sum(axis=1) + off_c.sum(axis=1)) == 0   # (N, U)
    for u in range(u_count):
        for i in np.nonzero(local[:, u])[0]:
            if hm[i, u] or hs[i, u]:
                continue
            if hm_c[i, u] == 1 and fits(used_u[u], cap_u[u], mv[i]):
                hm[i, u] = 1
                used_u[u] += mv[i]
            elif hs_c[i, u] == 1 and fits(used_u[u], cap_u[u], sv[i]):
                hs[i, u] = 1
                used_u[u] += sv[i]
            else:
                return None

    def upgrade_mes(i, m):
        nonlocal used_m
        freed = mv[i] if (mm[i, m] == 1 and mm_f[i, m] == 0) else 0.0
        extra = sv[i] - freed
        if not fits(used_m[m], cap_m[m], extra):
            return False
        if mm[i, m] == 1 and mm_f[i, m] == 0:
            mm[i, m] = 0
        ms[i, m] = 1
        used_m[m] += extra
        return True

    def upgrade_hmd(i, u):
        nonlocal used_u
        freed = mv[i] if (hm[i, u] == 1 and hm_f[i, u] == 0) else 0.0
        extra = sv[i] - freed
        if not fits(used_u[u], cap_u[u], extra):
            return False
        if hm[i, u] == 1 and hm_f[i, u] == 0:
            hm[i, u] = 0
        hs[i, u] = 1
        used_u[u] += extra
        return True

    # energy repair: upgrade to SV (kills the projection) until budgets hold
    for m in range(m_count):
        def mes_energy():
            return float((q * e_mes * cnt[:, m] * (1 - ms[:, m])).sum())
        while mes_energy() > s.mes_energy_budget[m] * (1 + tol) + tol:
            cand = [(i, q[i] * e_mes[i] * cnt[i, m],
                     sv[i] - (mv[i] if (mm[i, m] == 1 and mm_f[i, m] == 0) else 0.0))
                    for i in np.nonzero((cnt[:, m] >= 1) & (ms[:, m] == 0)
                                        & (ms_c[:, m] == 1))[0]
                    if fits(used_m[m], cap_m[m],
                            sv[i] - (mv[i] if (mm[i, m] == 1 and mm_f[i, m] == 0) else 0.0))]
            if not cand:
                return None
            i = max(cand, key=lambda c: (c[1] / max(c[2], 1e-30), -c[0]))[0]
            if not upgrade_mes(i, m):
                return None
    for u in range(u_count):
        def hmd_energy():
            return float((q * e_hmd * local[:, u] * (1 - hs[:, u])).sum())
        while hmd_energy() > s.hmd_energy_budget[u] * (1 + tol) + tol:
            cand = [(i, q[i] * e_hmd[i],
                     sv[i] - (mv[i] if (hm[i, u] == 1 and hm_f[i, u] == 0) else 0.0))
                    for i in np.nonzero(local[:, u] & (hs[:, u] == 0)
                                        & (hs_c[:, u] == 1))[0]
                    if fits(used_u[u], cap_u[u],
                            sv[i] - (mv[i] if (hm[i, u] == 1 and hm_f[i, u] == 0) else 0.0))]
            if not cand:
                return None
            i = max(cand, key=lambda c: (c[1] / max(c[2], 1e-30), -c[0]))[0]
            if not upgrade_hmd(i, u):
                return None

    # latency upgrades by gain per extra bit while capacity lasts
    entries = []
    entries += _marginal_heap_entries("mes", [
        (m, i, q[i] * t_mes[i] * cnt[i, m], sv[i] - (mv[i] if mm_f[i, m] == 0 else 0.0))
        for m in range(m_count)
        for i in np.nonzero((cnt[:, m] >= 1) & (mm[:, m] == 1) & (ms_c[:, m] == 1))[0]])
    entries += _marginal_heap_entries("hmd", [
        (u, i, q[i] * t_loc[i], sv[i] - (mv[i] if hm_f[i, u] == 0 else 0.0))
        for u in range(u_count)
        for i in np.nonzero(local[:, u] & (hm[:, u] == 1) & (hs_c[:, u] == 1))[0]])
    heapq.heapify(entries)
    while entries:
        _, kind, node, i = heapq.heappop(entries)
        if kind == "mes":
            if mm[i, node] == 1 and ms[i, node] == 0:
                upgrade_mes(i, node)
        else:
            if hm[i, node] == 1 and hs[i, node] == 0:
                upgrade_hmd(i, node)

    if power_mode == "continuous":
        power = allocate_power(s, off_m, off_c, rel_epsilon=power_rel_epsilon)
    elif power_mode == "equal":
        power = equal_split_power(s, off_m, off_c)
    elif power_mode == "grid":
        power = grid_power(s, off_m, off_c, levels=power_levels,
                           combo_cap=grid_combo_cap)
    elif power_mode == "pinned":
        if pinned_power is None:
            raise ValueError("pinned power mode requires pinned_power")
        power = PowerAllocation(np.asarray(pinned_power, float))
    else:
        raise ValueError(f"unknown power mode {power_mode!r}")

    dec = Decision(mm, ms, hm, hs, off_m, off_c, power)
    return dec if check_feasibility(s, dec).ok else None


# --- nearest offloading ----------------------------------------------------

def _knapsack_order(values: dict, weights: np.ndarray, capacity: float,
                    units: int = 2048) -> list[int]:
    """0/1 knapsack selection (DP on discretized weights, rounded up so the
    capacity bound stays valid); returns the chosen items, densest first."""
    if capacity <= 0:
        return []
    items = [i for i, v in values.items() if v > 0 and weights[i] <= capacity]
    wu = {i: max(1, int(np.ceil(weights[i] / capacity * units))) for i in items}
    best = np.zeros(units + 1)
    take: dict[int, np.ndarray] = {}
    for i in items:
        w = wu[i]
        shifted = np.full(units + 1, -np.inf)
        shifted[w:] = best[:units + 1 - w] + values[i]
        taken = shifted > best
        take[i] = taken
        best = np.where(taken, shifted, best)
    chosen = []
    j = int(np.argmax(best))
    for i in reversed(items):
        if j >= wu[i] and take[i][j]:
            chosen.append(i)
            j -= wu[i]
    chosen.sort(key=lambda i: (-values[i] / weights[i], i))
    return chosen


def nearest_offload_assignment(s: Scenario,
                               rank: str = "popularity") -> tuple[np.ndarray, np.ndarray]:
    """Offload tensors of the no-horizontal-collaboration strategy.

    Each HMD fills its own cache by popularity (SV preferred, MV when the
    SV no longer fits and the energy budget admits projecting), associates
    with the geometrically nearest SBS for everything else, and falls back
    to the cloud when that SBS's cache or energy cannot take the viewpoint.

    rank orders each SBS's admissions: "popularity" (the plain baseline)
    or "density" (popularity-mass per cached bit, a better knapsack that
    the solver uses as one of its seeds).
    """
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    q, mv = s.popularity, s.mv_sizes
    sv = s.sv_ratio * mv
    e_mes, e_hmd = s.mes_compute_energy(), s.hmd_compute_energy()

    local = np.zeros((n, u_count), bool)
    for u in range(u_count):
        cap, en = float(s.hmd_cache_bits[u]), float(s.hmd_energy_budget[u])
        for i in range(n):                 # catalog is popularity-ordered
            if sv[i] <= cap:
                local[i, u] = True
                cap -= sv[i]
            elif mv[i] <= cap and q[i] * e_hmd[i] <= en:
                local[i, u] = True
                cap -= mv[i]
                en -= q[i] * e_hmd[i]

    nearest = s.sbs_hmd_distances().argmin(axis=0)
    off_m = np.zeros((n, m_count, u_count), np.int8)
    off_c = np.zeros((n, m_count, u_count), np.int8)
    for m in range(m_count):
        users = np.nonzero(nearest == m)[0]
        if users.size == 0:
            continue
        cap, en = float(s.mes_cache_bits[m]), float(s.mes_energy_budget[m])
        needing = {i: [u for u in users if not local[i, u]] for i in range(n)}
        if rank == "density":
            order = sorted(range(n),
                           key=lambda i: (-q[i] * len(needing[i]) / mv[i], i))
        elif rank == "knapsack":
            values = {i: q[i] * len(needing[i]) for i in range(n)}
            chosen = _knapsack_order(values, mv, cap)
            rest = sorted((i for i in range(n) if i not in chosen),
                          key=lambda i: (-values[i] / mv[i], i))
            order = list(chosen) + rest
        else:
            order = range(n)
        for i in order:
            if not needing[i]:
                continue
            # admit with the smallest footprint; the caching completion
            # upgrades versions afterwards where it pays
            if mv[i] <= cap and q[i] * e_mes[i] * len(needing[i]) <= en:
                cap -= mv[i]
                en -= q[i] * e_mes[i] * len(needing[i])
                off_m[i, m, needing[i]] = 1
            elif sv[i] <= cap:
                cap -= sv[i]
                off_m[i, m, needing[i]] = 1
            else:
                off_c[i, m, needing[i]] = 1
    return off_m, off_c


def _baseline_result(name, s, dec, t0, trace_metrics=None) -> SolveResult:
    if dec is None:
        return SolveResult(name, False, None, np.inf, np.inf, 0, 0,
                           time.perf_counter() - t0, [], trace_metrics, [])
    value = objective(s, dec)
    return SolveResult(name, True, dec, value, 0.0, 0, 0,
                       time.perf_counter() - t0, [(0.0, value, value)],
                       trace_metrics, [0])


def solve_nearest_offloading(s: Scenario, power_mode: str = "continuous",
                             power_levels: int = 4) -> SolveResult:
    """NO baseline: local cache, else nearest MES, else cloud; caching and
    power completed greedily under the single-association offloads."""
    t0 = time.perf_counter()
    off_m, off_c = nearest_offload_assignment(s)
    dec = greedy_cache_power(s, off_m, off_c, power_mode=power_mode,
                             power_levels=power_levels)
    return _baseline_result("no", s, dec, t0)


# --- power equally allocated ------------------------------------------------

def equal_power_matrix(s: Scenario,
                       coverage_gain: float = DEFAULT_COVERAGE_GAIN) -> np.ndarray:
    """P_T split equally among each SBS's covered HMDs (gain threshold)."""
    covered = s.channel_gain >= coverage_gain
    counts = covered.sum(axis=1)
    p = np.zeros_like(s.channel_gain)
    for m in range(s.sbs_count):
        if counts[m]:
            p[m, covered[m]] = s.total_power / counts[m]
    return p


def solve_power_equal(s: Scenario, cfg: SolverConfig | None = None) -> SolveResult:
    """PEA baseline: each SBS's power split equally among the HMDs it
    serves (never tuned per link); caching and offloading optimized with
    that rule pinned."""
    base = cfg or SolverConfig()
    pinned = replace(base, power_mode="equal", pinned_power=None)
    res = jcpt_solve(s, pinned)
    res.algorithm = "pea"
    return res


# --- popularity-first caching ------------------------------------------------

def popularity_first_caches(s: Scenario):
    """Every cache filled with the most popular viewpoints, SV form first,
    MV when an SV no longer fits."""
    n = s.viewpoint_count
    mv, sv = s.mv_sizes, s.sv_ratio * s.mv_sizes

    def fill(cap_vec, count):
        c_mv = np.zeros((n, count), np.int8)
        c_sv = np.zeros((n, count), np.int8)
        for k in range(count):
            cap = float(cap_vec[k])
            for i in range(n):
                if sv[i] <= cap:
                    c_sv[i, k] = 1
                    cap -= sv[i]
                elif mv[i] <= cap:
                    c_mv[i, k] = 1
                    cap -= mv[i]
        return c_mv, c_sv

    mm, ms = fill(s.mes_cache_bits, s.sbs_count)
    hm, hs = fill(s.hmd_cache_bits, s.hmd_count)
    return mm, ms, hm, hs


def solve_popularity_first(s: Scenario, cfg: SolverConfig | None = None) -> SolveResult:
    """PF baseline: caches pinned popularity-first, the rest optimized."""
    base = cfg or SolverConfig()
    pinned = replace(base, pinned_cache=popularity_first_caches(s))
    res = jcpt_solve(s, pinned)
    res.algorithm = "pf"
    return res


# --- LRU over a request trace -------------------------------------------------

@dataclass(frozen=True)
class RequestTrace:
    """Time-ordered viewpoint requests, one stream per HMD.

    Entry t is (hmd_ids[t], viewpoint_ids[t]); streams are interleaved
    round-robin so every HMD sees the same request count.
    """

    hmd_ids: np.ndarray
    viewpoint_ids: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        for name in ("hmd_ids", "viewpoint_ids"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.hmd_ids.size)


def generate_trace(s: Scenario, steps: int | None = None,
                   seed: int = 0) -> RequestTrace:
    """Sample a trace of `steps` rounds (default 20 * N), each round one
    i.i.d. popularity-distributed request per HMD."""
    if steps is None:
        steps = 20 * s.viewpoint_count
    rng = np.random.default_rng(seed)
    draws = rng.choice(s.viewpoint_count, size=(steps, s.hmd_count),
                       p=s.popularity)
    hmds = np.tile(np.arange(s.hmd_count), steps)
    return RequestTrace(hmds, draws.reshape(-1), seed)


def solve_lru(s: Scenario, trace: RequestTrace,
              coverage_gain: float = DEFAULT_COVERAGE_GAIN) -> SolveResult:
    """LRU baseline driven by a request trace.

    Power is the PEA equal split (held fixed); requests route local cache
    first, then the nearest SBS currently caching the viewpoint, else the
    cloud via the nearest covered SBS.  Whatever SV passes through a cache
    is inserted, evicting least-recently-used entries until it fits.
    Reported objective and hit ratio are averages over the second half of
    the trace (warm caches); the returned decision is the static placement
    induced by the final cache state.
    """
    t0 = time.perf_counter()
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    if np.any(trace.viewpoint_ids < 0) or np.any(trace.viewpoint_ids >= n) \
            or np.any(trace.hmd_ids < 0) or np.any(trace.hmd_ids >= u_count):
        raise ValueError("trace references an unknown viewpoint or HMD")

    p_eq = equal_power_matrix(s, coverage_gain)
    rates = rate_matrix(s, p_eq)
    sv = s.sv_ratio * s.mv_sizes
    t_loc = s.hmd_compute_delay()
    order = np.argsort(s.sbs_hmd_distances(), axis=0)     # (M, U) nearest first

    mes_cache = [_OrderedLru(float(c)) for c in s.mes_cache_bits]
    hmd_cache = [_OrderedLru(float(c)) for c in s.hmd_cache_bits]

    total = len(trace)
    lat = np.zeros(total)
    hit = np.zeros(total, bool)
    for t in range(total):
        u = int(trace.hmd_ids[t])
        i = int(trace.viewpoint_ids[t])
        if i in hmd_cache[u]:
            hmd_cache[u].touch(i)
            lat[t] = 0.0
            hit[t] = True
            continue
        serve_m = -1
        for m in order[:, u]:
            if rates[m, u] > 0 and i in mes_cache[m]:
                serve_m = int(m)
                break
        if serve_m >= 0:
            mes_cache[serve_m].touch(i)
            lat[t] = sv[i] / rates[serve_m, u]
            hit[t] = True
        else:
            cover = [int(m) for m in order[:, u] if rates[m, u] > 0]
            if not cover:
                lat[t] = np.inf
                hit[t] = False
                continue
            m0 = cover[0]
            lat[t] = sv[i] / rates[m0, u] + s.backhaul_delay
            hit[t] = False
            mes_cache[m0].insert(i, sv[i])
        hmd_cache[u].insert(i, sv[i])

    half = total // 2
    warm = slice(half, total)
    per_hmd = np.zeros(u_count)
    for u in range(u_count):
        mask = trace.hmd_ids[warm] == u
        vals = lat[warm][mask]
        per_hmd[u] = vals.mean() if vals.size else 0.0
    trace_objective = float(per_hmd.sum())
    trace_hit = float(hit[warm].mean()) if total - half > 0 else 0.0

    # static decision induced by the final (warm) cache state
    dec = _decision_from_caches(s, mes_cache, hmd_cache, order, rates, p_eq)
    rep = check_feasibility(s, dec)
    metrics = {
        "trace_objective": trace_objective,
        "trace_hit_ratio": trace_hit,
        "static_objective": objective(s, dec),
        "static_hit_ratio": cache_hit_ratio(s, dec),
    }
    return SolveResult("lru", rep.ok, dec, trace_objective, 0.0, 0, 0,
                       time.perf_counter() - t0,
                       [(0.0, trace_objective, trace_objective)], metrics, [0])


class _OrderedLru:
    """id -> size map with least-recently-used eviction."""

    def __init__(self, capacity: float):
        self.capacity = capacity
        self.items: dict[int, float] = {}
        self.used = 0.0

    def __contains__(self, key):
        return key in self.items

    def touch(self, key):
        self.items[key] = self.items.pop(key)

    def insert(self, key, size):
        if key in self.items:
            self.touch(key)
            return True
        if size > self.capacity:
            return False
        while self.used + size > self.capacity:
            old_key = next(iter(self.items))
            self.used -= self.items.pop(old_key)
        self.items[key] = size
        self.used += size
        return True


def _decision_from_caches(s, mes_cache, hmd_cache, order, rates, p_eq) -> Decision:
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    sv = s.sv_ratio * s.mv_sizes
    hs = np.zeros((n, u_count), np.int8)
    for u in range(u_count):
        for i in hmd_cache[u].items:
            hs[i, u] = 1
    ms = np.zeros((n, m_count), np.int8)
    for m in range(m_count):
        for i in mes_cache[m].items:
            ms[i, m] = 1
    off_m = np.zeros((n, m_count, u_count), np.int8)
    off_c = np.zeros((n, m_count, u_count), np.int8)
    for u in range(u_count):
        cover = [int(m) for m in order[:, u] if rates[m, u] > 0]
        for i in range(n):
            if hs[i, u]:
                continue
            served = False
            for m in cover:
                if ms[i, m]:
                    off_m[i, m, u] = 1
                    served = True
                    break
            if not served and cover:
                off_c[i, cover[0], u] = 1
    zeros = np.zeros((n, m_count), np.int8)
    return Decision(zeros, ms, np.zeros((n, u_count), np.int8), hs,
                    off_m, off_c, PowerAllocation(p_eq))
