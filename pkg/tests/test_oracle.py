"""Exhaustive oracle: closed forms, naive cross-check, grid monotonicity."""

import itertools
import math

import numpy as np
import pytest

from vrmec import latency, model, oracle, radio
from vrmec.latency import Decision, check_feasibility, empty_decision, objective
from vrmec.radio import PowerAllocation


def scenario_1x1x1(mes_cache=1e9, hmd_cache=0.0):
    cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=1,
                             mes_cache_bits=mes_cache, hmd_cache_bits=hmd_cache,
                             total_bandwidth_hz=2e7)
    return model.generate_scenario(cfg, 3)


def test_all_local_gives_zero():
    cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=2,
                             hmd_cache_bits=1e9, hmd_energy_budget_j=1e6)
    s = model.generate_scenario(cfg, 0)
    res = oracle.brute_force_solve(s, power_levels=2)
    assert res.optimal_value == 0.0
    assert res.feasible and res.enumerated_count > 0


def test_single_link_closed_form():
    s = scenario_1x1x1()
    res = oracle.brute_force_solve(s, power_levels=2)
    d = s.mv_sizes[0]
    gamma = s.total_power * s.channel_gain[0, 0] / s.noise_power
    expected = s.sv_ratio * d / (s.bandwidth_per_hmd * math.log2(1 + gamma))
    assert math.isclose(res.optimal_value, expected, rel_tol=1e-12)
    best = res.optimal_decisions[0]
    assert best.cache_mes_sv[0, 0] == 1        # SV cached at the MES
    assert best.power.p[0, 0] == s.total_power


def test_more_levels_never_increase_value():
    cfg = model.micro_config(sbs_count=2, hmd_count=1, viewpoint_count=2,
                             mes_cache_bits=9e6, hmd_cache_bits=2e6,
                             total_bandwidth_hz=2e7)
    for seed in range(3):
        s = model.generate_scenario(cfg, seed)
        v2 = oracle.brute_force_solve(s, power_levels=2).optimal_value
        v4 = oracle.brute_force_solve(s, power_levels=4).optimal_value
        assert v4 <= v2 + 1e-15


def test_deterministic():
    cfg = model.micro_config(sbs_count=2, hmd_count=1, viewpoint_count=2,
                             total_bandwidth_hz=2e7)
    s = model.generate_scenario(cfg, 5)
    a = oracle.brute_force_solve(s, power_levels=3)
    b = oracle.brute_force_solve(s, power_levels=3)
    assert a.optimal_value == b.optimal_value
    assert a.enumerated_count == b.enumerated_count


def test_optimal_decisions_feasible():
    cfg = model.micro_config(sbs_count=2, hmd_count=2, viewpoint_count=2,
                             mes_cache_bits=9e6, hmd_cache_bits=2e6,
                             total_bandwidth_hz=2e7)
    s = model.generate_scenario(cfg, 2)
    res = oracle.brute_force_solve(s, power_levels=3)
    assert res.feasible
    for dec in res.optimal_decisions:
        rep = check_feasibility(s, dec)
        assert rep.ok, rep.violated()
        assert objective(s, dec) == res.optimal_value


def test_size_cap_refusal():
    s = model.generate_scenario(model.paper_config(), 0)
    with pytest.raises(oracle.OracleSizeError):
        oracle.brute_force_solve(s, power_levels=4)


def _naive_minimum(s, levels):
    """Raw-lattice reference: every binary decision combination, every grid
    power on every link, evaluated through the public feasibility check and
    objective.  Independent of the oracle's decomposition."""
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    grid = np.linspace(0, s.total_power, levels)
    shapes = [(n, m_count), (n, m_count), (n, u_count), (n, u_count),
              (n, m_count, u_count), (n, m_count, u_count)]
    sizes = [int(np.prod(sh)) for sh in shapes]
    total_bits = sum(sizes)

    link_combos = []
    for combo in itertools.product(range(levels), repeat=m_count * u_count):
        p = grid[np.array(combo)].reshape(m_count, u_count)
        if np.all(p.sum(axis=1) <= s.total_power * (1 + 1e-12)):
            link_combos.append(p)

    best = math.inf
    for bits in itertools.product((0, 1), repeat=total_bits):
        arrays = []
        pos = 0
        for sh, size in zip(shapes, sizes):
            arrays.append(np.array(bits[pos:pos + size], np.int8).reshape(sh))
            pos += size
        d = Decision(*arrays, PowerAllocation(np.zeros((m_count, u_count))))
        # cheap structural pre-filter to keep the sweep fast
        if np.any(d.offload_mes + d.offload_cloud > 1):
            continue
        if np.any(d.offload_mes.sum(axis=1) > 1) or np.any(d.offload_cloud.sum(axis=1) > 1):
            continue
        for p in link_combos:
            d.power = PowerAllocation(p)
            if not check_feasibility(s, d).ok:
                continue
            best = min(best, objective(s, d))
    return best


def test_naive_cross_check_1x1x2():
    cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=2,
                             mes_cache_bits=9e6, hmd_cache_bits=2e6,
                             total_bandwidth_hz=2e7)
    for seed in (0, 1):
        s = model.generate_scenario(cfg, seed)
        naive = _naive_minimum(s, levels=3)
        res = oracle.brute_force_solve(s, power_levels=3)
        assert math.isclose(res.optimal_value, naive, rel_tol=1e-12), \
            (res.optimal_value, naive)


def test_naive_cross_check_2x1x1():
    cfg = model.micro_config(sbs_count=2, hmd_count=1, viewpoint_count=1,
                             mes_cache_bits=9e6, hmd_cache_bits=2e6,
                             total_bandwidth_hz=2e7)
    s = model.generate_scenario(cfg, 7)
    naive = _naive_minimum(s, levels=3)
    res = oracle.brute_force_solve(s, power_levels=3)
    assert math.isclose(res.optimal_value, naive, rel_tol=1e-12)
