"""End-to-end latency model: per-request delay, the popularity-weighted
objective, compute-energy accounting, feasibility checking, and the cache
hit ratio.

A request (i, u) is served along one of three paths:

* MES path: task offloaded to MES m.  If m caches the MV, projection runs
  there first (d_i w_i / f_M), then the SV is transmitted (alpha d_i / R_mu).
* local path: no offload anywhere.  If the HMD caches the MV it projects
  locally (d_i w_i / f_V); with the SV cached the delay is zero.
* cloud path: the SV is fetched over the backhaul via SBS m (tau_b) and
  transmitted (alpha d_i / R_mu).

A serving link with zero rate yields UNREACHABLE (+inf), which compares
greater than every finite latency, so optimizers reject dead links without
special-casing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import Scenario
from .radio import PowerAllocation, active_links, power_feasible, rate_matrix

__all__ = [
    "UNREACHABLE",
    "Decision",
    "ConstraintCheck",
    "FeasibilityReport",
    "CONSTRAINT_IDS",
    "latency_matrix",
    "request_latency",
    "objective",
    "delay_sum",
    "energy_usage",
    "check_feasibility",
    "cache_hit_ratio",
    "decision_to_json",
    "decision_from_json",
    "empty_decision",
]

UNREACHABLE = math.inf

# eq1-eq3: one server per task; eq4-eq5: cache capacities; eq6-eq7: compute
# energy budgets; eq8: serving links reachable; eq9: transmit power budget;
# eq11: MES offload needs a cached version; eq13: every request served.
CONSTRAINT_IDS = ("eq1", "eq2", "eq3", "eq4", "eq5", "eq6", "eq7",
                  "eq8", "eq9", "eq11", "eq13")

_LABELS = {
    "eq1": "at most one server per (viewpoint, MES, HMD) task",
    "eq2": "at most one MES offload per (viewpoint, HMD)",
    "eq3": "at most one cloud offload per (viewpoint, HMD)",
    "eq4": "MES cache capacity",
    "eq5": "HMD cache capacity",
    "eq6": "MES compute-energy budget",
    "eq7": "HMD compute-energy budget",
    "eq8": "serving links have positive rate",
    "eq9": "per-SBS transmit power budget",
    "eq11": "MES offload requires MV or SV cached there",
    "eq13": "every (viewpoint, HMD) pair has a serving path",
}


@dataclass
class Decision:
    """One candidate solution: four cache matrices, two offload tensors,
    one power matrix.

    Shapes: cache_mes_* are (N, M); cache_hmd_* are (N, U); offload_* are
    (N, M, U); all binary int arrays.
    """

    cache_mes_mv: np.ndarray
    cache_mes_sv: np.ndarray
    cache_hmd_mv: np.ndarray
    cache_hmd_sv: np.ndarray
    offload_mes: np.ndarray
    offload_cloud: np.ndarray
    power: PowerAllocation

    def __post_init__(self):
        for name in ("cache_mes_mv", "cache_mes_sv", "cache_hmd_mv",
                     "cache_hmd_sv", "offload_mes", "offload_cloud"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int8))

    def copy(self) -> "Decision":
        return Decision(
            self.cache_mes_mv.copy(), self.cache_mes_sv.copy(),
            self.cache_hmd_mv.copy(), self.cache_hmd_sv.copy(),
            self.offload_mes.copy(), self.offload_cloud.copy(),
            PowerAllocation(self.power.p.copy()))

    def served_locally(self) -> np.ndarray:
        """(N, U) mask of pairs with no offload anywhere."""
        return (self.offload_mes.sum(axis=1) + self.offload_cloud.sum(axis=1)) == 0


def empty_decision(s: Scenario) -> Decision:
    n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
    return Decision(
        np.zeros((n, m), np.int8), np.zeros((n, m), np.int8),
        np.zeros((n, u), np.int8), np.zeros((n, u), np.int8),
        np.zeros((n, m, u), np.int8), np.zeros((n, m, u), np.int8),
        PowerAllocation.zeros(s))


def _inv_rates(rates: np.ndarray) -> np.ndarray:
    """1/R with zero-rate links mapped to +inf."""
    with np.errstate(divide="ignore"):
        return np.where(rates > 0, 1.0 / np.where(rates > 0, rates, 1.0), np.inf)


def latency_matrix(s: Scenario, d: Decision,
                   rates: np.ndarray | None = None) -> np.ndarray:
    """Per-request end-to-end latency tau as an (N, U) array.

    tau = tau_mes + tau_local + tau_cloud.  Entries are UNREACHABLE where a
    serving link has zero rate.
    """
    if rates is None:
        rates = rate_matrix(s, d.power.p)
    inv = _inv_rates(rates)                      # (M, U)
    sv = s.sv_sizes                              # (N,)
    t_mes = s.mes_compute_delay()                # (N,)
    t_loc = s.hmd_compute_delay()                # (N,)

    # MES path: (compute if MV cached at m) + SV transmission, per offload.
    tx = sv[:, None, None] * inv[None, :, :]     # (N, M, U)
    mes_terms = (t_mes[:, None] * d.cache_mes_mv)[:, :, None] + tx
    with np.errstate(invalid="ignore"):
        tau_mes = np.where(d.offload_mes == 1, mes_terms, 0.0).sum(axis=1)

    # Local path: only when the pair is offloaded nowhere.
    local = d.served_locally()
    tau_loc = np.where(local, d.cache_hmd_mv * t_loc[:, None], 0.0)

    # Cloud path: backhaul plus SV transmission, per offload.
    cloud_terms = tx + s.backhaul_delay
    with np.errstate(invalid="ignore"):
        tau_cloud = np.where(d.offload_cloud == 1, cloud_terms, 0.0).sum(axis=1)

    return tau_mes + tau_loc + tau_cloud


def request_latency(s: Scenario, d: Decision, i: int, u: int) -> float:
    """End-to-end latency of viewpoint i at HMD u (seconds).

    Returns UNREACHABLE when a serving link for the pair has zero rate.
    """
    if not (0 <= i < s.viewpoint_count and 0 <= u < s.hmd_count):
        raise IndexError(f"request ({i}, {u}) out of range")
    return float(latency_matrix(s, d)[i, u])


def objective(s: Scenario, d: Decision,
              rates: np.ndarray | None = None) -> float:
    """Popularity-weighted latency sum over all HMDs and viewpoints."""
    tau = latency_matrix(s, d, rates)
    return float((s.popularity[:, None] * tau).sum())


def delay_sum(s: Scenario, d: Decision) -> float:
    """Unweighted latency sum over all (viewpoint, HMD) pairs."""
    return float(latency_matrix(s, d).sum())


def energy_usage(s: Scenario, d: Decision) -> tuple[np.ndarray, np.ndarray]:
    """Average compute energy per MES and per HMD (J).

    MES m accrues projection energy for every task it serves whose SV is
    not cached there (compute energy is charged to the serving MES only);
    HMD u accrues energy for locally served viewpoints without a local SV.
    """
    q = s.popularity
    e_mes = s.mes_compute_energy()
    e_hmd = s.hmd_compute_energy()
    served_by_mes = d.offload_mes.sum(axis=2)          # (N, M) user counts
    mes = ((q * e_mes)[:, None] * (1 - d.cache_mes_sv) * served_by_mes).sum(axis=0)
    local = d.served_locally()
    hmd = ((q * e_hmd)[:, None] * (1 - d.cache_hmd_sv) * local).sum(axis=0)
    return mes, hmd


def cache_hit_ratio(s: Scenario, d: Decision) -> float:
    """Popularity-weighted, per-HMD-averaged fraction of requests served
    without the cloud path (local cache or MES offload)."""
    local_hit = d.served_locally() & ((d.cache_hmd_mv + d.cache_hmd_sv) >= 1)
    mes_hit = d.offload_mes.sum(axis=1) >= 1
    hit = (local_hit | mes_hit).astype(float)
    return float((s.popularity[:, None] * hit).sum() / s.hmd_count)


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: str
    holds: bool
    violation: float
    offender: tuple | None

    @property
    def label(self) -> str:
        return _LABELS[self.constraint]


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    def violated(self) -> list[str]:
        return [c.constraint for c in self.checks if not c.holds]

    def __getitem__(self, constraint: str) -> ConstraintCheck:
        for c in self.checks:
            if c.constraint == constraint:
                return c
        raise KeyError(constraint)

    def to_records(self) -> list[dict]:
        return [
            {"constraint": c.constraint, "label": c.label, "holds": c.holds,
             "violation": c.violation, "offender": c.offender}
            for c in self.checks
        ]

    def as_table(self) -> str:
        lines = [f"{'constraint':<6} {'ok':<5} {'violation':>12}  detail"]
        for c in self.checks:
            mark = "yes" if c.holds else "NO"
            where = "" if c.offender is None else f" at {c.offender}"
            lines.append(
                f"{c.constraint:<6} {mark:<5} {c.violation:>12.6g}  {c.label}{where}")
        return "\n".join(lines)


def _argmax_index(arr: np.ndarray) -> tuple:
    return tuple(int(k) for k in np.unravel_index(int(np.argmax(arr)), arr.shape))


def check_feasibility(s: Scenario, d: Decision) -> FeasibilityReport:
    """Evaluate every modeled constraint; reports, never raises.

    Cache capacities count MV entries at full size and SV entries at
    sv_ratio times that.  The offload-needs-cache coupling is the binary
    implication offload => (MV or SV cached at the serving MES).
    """
    checks: list[ConstraintCheck] = []
    q = s.popularity
    mv, alpha = s.mv_sizes, s.sv_ratio

    def add(cid, violation, offender):
        checks.append(ConstraintCheck(cid, violation <= 0, float(max(violation, 0.0)),
                                      offender if violation > 0 else None))

    def slack(used, budget):
        # inclusive <=, evaluated with a 1e-9 relative allowance so
        # exactly-at-capacity placements pass despite float rounding
        return used - budget - 1e-9 * (1.0 + np.abs(budget))

    both = d.offload_mes + d.offload_cloud - 1
    add("eq1", both.max(initial=0), _argmax_index(both) if both.size else None)

    mes_per_pair = d.offload_mes.sum(axis=1) - 1
    add("eq2", mes_per_pair.max(initial=0), _argmax_index(mes_per_pair))
    cloud_per_pair = d.offload_cloud.sum(axis=1) - 1
    add("eq3", cloud_per_pair.max(initial=0), _argmax_index(cloud_per_pair))

    mes_used = ((d.cache_mes_mv + alpha * d.cache_mes_sv) * mv[:, None]).sum(axis=0)
    over = slack(mes_used, s.mes_cache_bits)
    add("eq4", over.max(initial=0), (int(np.argmax(over)),))
    hmd_used = ((d.cache_hmd_mv + alpha * d.cache_hmd_sv) * mv[:, None]).sum(axis=0)
    over = slack(hmd_used, s.hmd_cache_bits)
    add("eq5", over.max(initial=0), (int(np.argmax(over)),))

    mes_energy, hmd_energy = energy_usage(s, d)
    over = slack(mes_energy, s.mes_energy_budget)
    add("eq6", over.max(initial=0), (int(np.argmax(over)),))
    over = slack(hmd_energy, s.hmd_energy_budget)
    add("eq7", over.max(initial=0), (int(np.argmax(over)),))

    rates = rate_matrix(s, d.power.p)
    dead = active_links(d.offload_mes, d.offload_cloud) & (rates <= 0)
    add("eq8", float(dead.sum()), _argmax_index(dead) if dead.any() else None)

    p = d.power.p
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        add("eq9", 1.0, _argmax_index(~np.isfinite(p) | (p < 0)))
    else:
        over = slack(p.sum(axis=1), s.total_power)
        add("eq9", over.max(initial=0), (int(np.argmax(over)),))

    uncached = d.offload_mes * (1 - d.cache_mes_mv[:, :, None]) \
        * (1 - d.cache_mes_sv[:, :, None])
    add("eq11", float(uncached.sum()),
        _argmax_index(uncached) if uncached.any() else None)

    serving = d.offload_mes.sum(axis=1) + d.offload_cloud.sum(axis=1) \
        + d.cache_hmd_mv + d.cache_hmd_sv
    unserved = serving < 1
    # weight by q so the magnitude reflects demand left unserved
    add("eq13", float((q[:, None] * unserved).sum()),
        _argmax_index(unserved) if unserved.any() else None)

    return FeasibilityReport(tuple(checks))


# --- JSON round trip ---------------------------------------------------

def decision_to_json(d: Decision) -> str:
    doc = {
        "cache_mes_mv": d.cache_mes_mv.tolist(),
        "cache_mes_sv": d.cache_mes_sv.tolist(),
        "cache_hmd_mv": d.cache_hmd_mv.tolist(),
        "cache_hmd_sv": d.cache_hmd_sv.tolist(),
        "offload_mes": d.offload_mes.tolist(),
        "offload_cloud": d.offload_cloud.tolist(),
        "power": d.power.p.tolist(),
    }
    return json.dumps(doc)


def decision_from_json(text: str) -> Decision:
    doc = json.loads(text)
    return Decision(
        np.array(doc["cache_mes_mv"]), np.array(doc["cache_mes_sv"]),
        np.array(doc["cache_hmd_mv"]), np.array(doc["cache_hmd_sv"]),
        np.array(doc["offload_mes"]), np.array(doc["offload_cloud"]),
        PowerAllocation(np.array(doc["power"])))
