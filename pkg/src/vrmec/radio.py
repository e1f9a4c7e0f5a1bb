"""Downlink radio model: SINR under universal frequency reuse, Shannon
rates, and the continuous power-allocation subproblem.

The SINR of link (m, u) is

    sinr = p_mu h_mu / (I_inter + zeta * I_intra + n0)

where interference is what HMD u actually receives from transmissions not
intended for it: I_inter = sum_{b != m} sum_{v != u} p_bv h_bu and
I_intra = sum_{v != u} p_mv h_mu, with zeta the intra-cell cancellation
factor.  Transmissions other SBSs direct at the *same* HMD are excluded
from both sums (they are useful multi-connectivity signal, not
interference).

For a fixed discrete decision the power subproblem is solved by cyclic
coordinate descent with a golden-section line search per link.  Global
optimality is not claimed (interference coupling is nonconvex); tests
compare against a grid-search oracle on tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import Scenario

__all__ = [
    "PowerAllocation",
    "sinr",
    "sinr_matrix",
    "link_rate",
    "rate_matrix",
    "max_rate_matrix",
    "active_links",
    "allocate_power",
    "equal_split_power",
    "grid_power",
    "power_feasible",
]

GOLDEN_ITERATIONS = 40          # bracket shrink factor 0.618^40 < 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_CYCLES = 60                # termination guard for coordinate descent


@dataclass(frozen=True)
class PowerAllocation:
    """Transmit powers p (M x U, watts); row m must sum to at most P_T."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @staticmethod
    def zeros(s: Scenario) -> "PowerAllocation":
        return PowerAllocation(np.zeros((s.sbs_count, s.hmd_count)))


def sinr_matrix(s: Scenario, p: np.ndarray) -> np.ndarray:
    """SINR for every link as an (M, U) array.

    contrib[b, u] = h_bu * (sum_v p_bv - p_bu) is the power HMD u receives
    from SBS b's transmissions to other HMDs; summed over b != m it is the
    inter-cell interference of link (m, u), and contrib[m, u] itself is
    the intra-cell interference.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (s.sbs_count, s.hmd_count):
        raise ValueError(f"power matrix must be {s.sbs_count}x{s.hmd_count}")
    h = s.channel_gain
    rowp = p.sum(axis=1, keepdims=True)
    contrib = h * (rowp - p)
    per_hmd = contrib.sum(axis=0, keepdims=True)
    den = (per_hmd - contrib) + s.orthogonality * contrib + s.noise_power
    return (p * h) / den


def sinr(s: Scenario, p: PowerAllocation, m: int, u: int) -> float:
    """SINR of the single link (m, u)."""
    if not (0 <= m < s.sbs_count and 0 <= u < s.hmd_count):
        raise IndexError(f"link ({m}, {u}) out of range")
    return float(sinr_matrix(s, p.p)[m, u])


def link_rate(s: Scenario, gamma: float) -> float:
    """Shannon rate W * log2(1 + sinr) in bits/s."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    return s.bandwidth_per_hmd * math.log2(1.0 + gamma)


def rate_matrix(s: Scenario, p: np.ndarray) -> np.ndarray:
    """Rates of every link under power matrix p, as an (M, U) array."""
    return s.bandwidth_per_hmd * np.log2(1.0 + sinr_matrix(s, p))


def max_rate_matrix(s: Scenario) -> np.ndarray:
    """Interference-free rate cap per link: full budget, nothing else on air.

    No feasible allocation can exceed these rates, which makes them the
    right optimistic rates for relaxation bounds.
    """
    gamma = s.total_power * s.channel_gain / s.noise_power
    return s.bandwidth_per_hmd * np.log2(1.0 + gamma)


def active_links(offload_mes: np.ndarray, offload_cloud: np.ndarray) -> np.ndarray:
    """Boolean (M, U) mask of links that carry at least one offloaded task."""
    return (offload_mes.sum(axis=0) + offload_cloud.sum(axis=0)) >= 1


def power_feasible(s: Scenario, p: np.ndarray, tol: float = 1e-9) -> bool:
    """Per-SBS budget check: entries nonnegative and finite, rows <= P_T."""
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        return False
    return bool(np.all(p.sum(axis=1) <= s.total_power * (1 + tol)))


def _weighted_delay(s: Scenario, p: np.ndarray, demand: np.ndarray,
                    active: np.ndarray) -> float:
    """Popularity-weighted transmission delay sum over active links.

    demand[m, u] aggregates q_i * sv_size_i over tasks served through the
    link; a zero-rate active link yields +inf.
    """
    rates = rate_matrix(s, p)[active]
    d = demand[active]
    with np.errstate(divide="ignore"):
        per_link = np.where(rates > 0, d / np.where(rates > 0, rates, 1.0), np.inf)
    return float(per_link.sum())


def _golden_min(f, lo: float, hi: float) -> float:
    """Golden-section argmin of f on [lo, hi] with a fixed iteration count."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(GOLDEN_ITERATIONS):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def equal_split_power(s: Scenario, offload_mes: np.ndarray,
                      offload_cloud: np.ndarray) -> PowerAllocation:
    """Each SBS's budget split equally among the HMDs it actually serves."""
    active = active_links(np.asarray(offload_mes), np.asarray(offload_cloud))
    p = np.zeros((s.sbs_count, s.hmd_count))
    counts = active.sum(axis=1)
    for m in range(s.sbs_count):
        if counts[m]:
            p[m, active[m]] = s.total_power / counts[m]
    return PowerAllocation(p)


def allocate_power(s: Scenario, offload_mes: np.ndarray,
                   offload_cloud: np.ndarray,
                   epsilon: float | None = None,
                   rel_epsilon: float = 1e-6) -> PowerAllocation:
    """Power allocation for the links activated by a fixed discrete decision.

    Starting from an equal split of each SBS's budget among its active
    links, each active link's power is improved in turn (ascending m, then
    u) by a golden-section search over [0, residual budget]; cycles repeat
    until the objective improves by less than epsilon per full cycle
    (default rel_epsilon = 1e-6 times the starting objective).  Inactive
    links get zero power: they would only add interference.

    The returned allocation never violates the per-SBS budget and never has
    a worse weighted-delay objective than the equal-split start.
    """
    m_count, u_count = s.sbs_count, s.hmd_count
    offload_mes = np.asarray(offload_mes)
    offload_cloud = np.asarray(offload_cloud)
    per_task = s.popularity * s.sv_sizes
    demand = np.tensordot(per_task, offload_mes + offload_cloud, axes=(0, 0))
    active = demand > 0
    if not active.any():
        return PowerAllocation.zeros(s)

    # Scalar state over active links only (inactive links stay at zero and
    # radiate nothing).
    am, au = np.nonzero(active)
    n_act = am.size
    rows_of = am.tolist()
    cols_of = au.tolist()
    h = s.channel_gain
    h_act = h[am, au].tolist()
    d_act = demand[am, au].tolist()
    w_hz, zeta, n0, p_total = (s.bandwidth_per_hmd, s.orthogonality,
                               s.noise_power, s.total_power)
    log2 = math.log2

    counts = active.sum(axis=1)
    p_act = [p_total / counts[rows_of[k]] for k in range(n_act)]

    # prow[m]: SBS m's radiated power; recv[v]: total power HMD v receives
    # (sum_b h_bv prow_b); own[v]: the part carried by v's own links.
    def rebuild_state():
        prow = [0.0] * m_count
        for k in range(n_act):
            prow[rows_of[k]] += p_act[k]
        recv = [0.0] * u_count
        for v in range(u_count):
            recv[v] = float(sum(h[b, v] * prow[b] for b in range(m_count)))
        own = [0.0] * u_count
        for k in range(n_act):
            own[cols_of[k]] += h_act[k] * p_act[k]
        return prow, recv, own

    def den_of(k, prow, recv, own):
        v = cols_of[k]
        a = rows_of[k]
        other = h_act[k] * (prow[a] - p_act[k])   # own-SBS power to others
        return (recv[v] - own[v] - other) + zeta * other + n0

    def total_value(prow, recv, own):
        out = 0.0
        for k in range(n_act):
            num = p_act[k] * h_act[k]
            rate = w_hz * log2(1.0 + num / den_of(k, prow, recv, own))
            if rate <= 0.0:
                return math.inf
            out += d_act[k] / rate
        return out

    prow, recv, own = rebuild_state()
    current = total_value(prow, recv, own)
    if epsilon is None:
        epsilon = rel_epsilon * current \
            if math.isfinite(current) and current > 0 else rel_epsilon

    order = sorted(range(n_act), key=lambda k: (rows_of[k], cols_of[k]))
    for _ in range(_MAX_CYCLES):
        start_value = current
        for j in order:
            m, u = rows_of[j], cols_of[j]
            residual = p_total - (prow[m] - p_act[j])
            if residual <= 0:
                continue
            # den_k(x) = den_k + (x - p_j) * w_k: links toward the same HMD
            # are unaffected; other victims see the power change through
            # h[m, victim], orthogonality-weighted for same-SBS links.
            # Links whose denominator can shift only negligibly are held
            # constant during the line search (the search is guided by the
            # approximation; acceptance below re-evaluates exactly).
            den_base = [0.0] * n_act
            w_all = [0.0] * n_act
            touched = [j]
            background = 0.0
            for k in range(n_act):
                vk = cols_of[k]
                dk = den_of(k, prow, recv, own)
                den_base[k] = dk
                if vk == u:
                    wk = 0.0
                elif rows_of[k] == m:
                    wk = zeta * h[m, vk]
                else:
                    wk = float(h[m, vk])
                w_all[k] = wk
                if k == j:
                    continue
                if wk * p_total <= 1e-6 * dk:
                    rate = w_hz * log2(1.0 + p_act[k] * h_act[k] / dk)
                    if rate <= 0.0:
                        background = math.inf
                    else:
                        background += d_act[k] / rate
                else:
                    touched.append(k)
            hj = h_act[j]
            num_j0 = p_act[j] * hj

            def f(x):
                dp = x - p_act[j]
                out = background
                for k in touched:
                    num = num_j0 + dp * hj if k == j else p_act[k] * h_act[k]
                    rate = w_hz * log2(1.0 + num / (den_base[k] + dp * w_all[k]))
                    if rate <= 0.0:
                        return math.inf
                    out += d_act[k] / rate
                return out

            def exact(x):
                dp = x - p_act[j]
                out = 0.0
                for k in range(n_act):
                    num = num_j0 + dp * hj if k == j else p_act[k] * h_act[k]
                    rate = w_hz * log2(1.0 + num / (den_base[k] + dp * w_all[k]))
                    if rate <= 0.0:
                        return math.inf
                    out += d_act[k] / rate
                return out

            best_x, best_f = p_act[j], current
            for x in (_golden_min(f, 0.0, residual), 0.0, residual):
                fx = exact(x)
                if fx < best_f:
                    best_x, best_f = x, fx
            if best_x != p_act[j]:
                dp = best_x - p_act[j]
                p_act[j] = best_x
                prow[m] += dp
                for v in range(u_count):
                    recv[v] += h[m, v] * dp
                own[u] += hj * dp
            current = best_f
        if start_value - current < epsilon:
            break

    p = np.zeros((m_count, u_count))
    p[am, au] = p_act
    # incremental bookkeeping can leave a one-ulp budget excess
    for m in range(m_count):
        excess = p[m].sum() - p_total
        while excess > 0:
            p[m, int(np.argmax(p[m]))] -= excess
            excess = p[m].sum() - p_total
    assert power_feasible(s, p), "coordinate descent left the power budget"
    return PowerAllocation(p)


def _budget_tuples(levels: np.ndarray, k: int, budget: float) -> list[tuple[float, ...]]:
    """All k-tuples of grid levels with sum <= budget, lexicographic order."""
    if k == 0:
        return [()]
    out = []
    tol = 1e-9 * (1 + budget)
    for lv in levels:
        if lv > budget + tol:
            continue
        for rest in _budget_tuples(levels, k - 1, budget - lv):
            out.append((float(lv),) + rest)
    return out


def grid_power(s: Scenario, offload_mes: np.ndarray, offload_cloud: np.ndarray,
               levels: int = 4, combo_cap: int = 500_000) -> PowerAllocation:
    """Exhaustive power search on a per-link grid {0, P_T/(L-1), ..., P_T}.

    Each SBS's budget is split over its active links; every admissible
    combination is evaluated and the exact grid optimum of the weighted
    transmission delay is returned (first combination wins ties, in
    lexicographic grid order).  Exact within its grid, so it gives solver
    runs a search space identical to the enumeration oracle's.
    """
    per_task = s.popularity * s.sv_sizes
    demand = np.tensordot(per_task, np.asarray(offload_mes) + np.asarray(offload_cloud),
                          axes=(0, 0))
    _, best = grid_min_weighted_delay(s, demand, levels, combo_cap)
    return PowerAllocation(best)


def grid_min_weighted_delay(s: Scenario, demand: np.ndarray, levels: int = 4,
                            combo_cap: int = 500_000) -> tuple[float, np.ndarray]:
    """Exact grid minimum of the weighted transmission delay for a given
    per-link demand matrix; returns (minimum, minimizing power matrix)."""
    if levels < 2:
        raise ValueError("power grid needs at least 2 levels")
    active = demand > 0
    if not active.any():
        return 0.0, np.zeros((s.sbs_count, s.hmd_count))

    grid = np.linspace(0.0, s.total_power, levels)
    per_sbs: list[list[tuple[float, ...]]] = []
    link_cols: list[np.ndarray] = []
    total = 1
    for m in range(s.sbs_count):
        cols = np.nonzero(active[m])[0]
        link_cols.append(cols)
        combos = _budget_tuples(grid, len(cols), s.total_power)
        total *= len(combos)
        if total > combo_cap:
            raise ValueError(
                f"power grid enumeration needs more than {combo_cap} combinations")
        per_sbs.append(combos)

    mats = np.zeros((total, s.sbs_count, s.hmd_count))
    for k, joint in enumerate(itertools.product(*per_sbs)):
        for m, combo in enumerate(joint):
            mats[k, m, link_cols[m]] = combo

    h = s.channel_gain[None]
    rowp = mats.sum(axis=2, keepdims=True)
    contrib = h * (rowp - mats)
    per_hmd = contrib.sum(axis=1, keepdims=True)
    den = (per_hmd - contrib) + s.orthogonality * contrib + s.noise_power
    rates = s.bandwidth_per_hmd * np.log2(1.0 + mats * h / den)
    with np.errstate(divide="ignore"):
        per_link = np.where(demand[None] > 0,
                            demand[None] / np.where(rates > 0, rates, 1.0),
                            0.0)
        per_link = np.where((demand[None] > 0) & (rates <= 0), math.inf,
                            per_link)
    vals = per_link.sum(axis=(1, 2))
    best = int(np.argmin(vals))          # first index wins ties
    return float(vals[best]), mats[best]
