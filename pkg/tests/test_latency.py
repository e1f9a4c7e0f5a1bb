"""Delay components, objective, energy, feasibility, hit ratio."""

import math

import numpy as np
import pytest

from vrmec import latency, model, radio
from vrmec.latency import Decision, empty_decision
from vrmec.radio import PowerAllocation


def one_pair_scenario(w=1e8, n0=1e-9, h=1e-9, tau_b=0.1, popularity=(1.0,)):
    """Single SBS and HMD; gamma = 1 at full power, so R = W exactly."""
    vps = tuple(model.Viewpoint(i + 1, 1e6, 50.0, q)
                for i, q in enumerate(popularity))
    return model.Scenario(
        1, 1, vps, 4.0, np.array([[h]]), w, n0, 0.1, 1.0,
        1e10, 2e9, 1e-27, 1e-27, np.array([1e9]), np.array([1e9]),
        np.array([1e9]), np.array([1e9]), tau_b, np.zeros((1, 2)),
        np.zeros((1, 2)))


def served(s, **entries):
    d = empty_decision(s)
    for name, idx in entries.items():
        getattr(d, name)[idx] = 1
    d.power = PowerAllocation(np.array([[1.0]]))
    return d


class TestRequestLatency:
    def test_sv_at_mes_transmission_only(self):
        s = one_pair_scenario()
        d = served(s, cache_mes_sv=(0, 0), offload_mes=(0, 0, 0))
        assert math.isclose(latency.request_latency(s, d, 0, 0), 0.04,
                            rel_tol=1e-9)

    def test_local_sv_is_free(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        assert latency.request_latency(s, d, 0, 0) == 0.0

    def test_cloud_path(self):
        s = one_pair_scenario()
        d = served(s, offload_cloud=(0, 0, 0))
        assert math.isclose(latency.request_latency(s, d, 0, 0), 0.14,
                            rel_tol=1e-9)

    def test_local_mv_projection(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_mv=(0, 0))
        assert math.isclose(latency.request_latency(s, d, 0, 0), 0.025,
                            rel_tol=1e-9)

    def test_mv_at_mes_compute_plus_transmission(self):
        s = one_pair_scenario()
        d = served(s, cache_mes_mv=(0, 0), offload_mes=(0, 0, 0))
        assert math.isclose(latency.request_latency(s, d, 0, 0), 0.045,
                            rel_tol=1e-9)

    def test_dead_serving_link_is_unreachable(self):
        s = one_pair_scenario()
        d = served(s, cache_mes_sv=(0, 0), offload_mes=(0, 0, 0))
        d.power = PowerAllocation(np.array([[0.0]]))
        got = latency.request_latency(s, d, 0, 0)
        assert got == latency.UNREACHABLE
        assert got > 1e300  # greater than any finite latency

    def test_index_errors(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        with pytest.raises(IndexError):
            latency.request_latency(s, d, 5, 0)


class TestObjective:
    def test_all_local_sv_is_zero(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        assert latency.objective(s, d) == 0.0

    def test_weighted_sum_by_hand(self):
        # q = (2/3, 1/3), tau = (0.03, 0.06) -> 0.04
        s = one_pair_scenario(popularity=(2 / 3, 1 / 3))
        tau = np.array([[0.03], [0.06]])
        val = float((s.popularity[:, None] * tau).sum())
        assert math.isclose(val, 0.04, rel_tol=1e-12)

    def test_linearity_in_latency(self):
        s = one_pair_scenario(popularity=(0.7, 0.3))
        d = empty_decision(s)
        d.cache_hmd_mv[0, 0] = 1
        d.cache_hmd_mv[1, 0] = 1
        base = latency.objective(s, d)
        fast = model.Scenario(**{
            **{f: getattr(s, f) for f in (
                "sbs_count", "hmd_count", "viewpoints", "sv_ratio",
                "channel_gain", "bandwidth_per_hmd", "noise_power",
                "orthogonality", "total_power", "mes_cpu_hz",
                "mes_energy_coeff", "hmd_energy_coeff", "mes_cache_bits",
                "hmd_cache_bits", "mes_energy_budget", "hmd_energy_budget",
                "backhaul_delay", "sbs_positions", "hmd_positions")},
            "hmd_cpu_hz": s.hmd_cpu_hz / 2})
        assert math.isclose(latency.objective(fast, d), 2 * base, rel_tol=1e-12)


class TestEnergy:
    def test_all_sv_cached_no_energy(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        mes, hmd = latency.energy_usage(s, d)
        assert mes.tolist() == [0.0] and hmd.tolist() == [0.0]

    def test_mes_projection_energy(self):
        # q=1, k=1e-27, f=1e10, d=1e6, w=50 -> 5 J
        s = one_pair_scenario()
        d = served(s, cache_mes_mv=(0, 0), offload_mes=(0, 0, 0))
        mes, _ = latency.energy_usage(s, d)
        assert math.isclose(mes[0], 5.0, rel_tol=1e-9)

    def test_hmd_projection_energy(self):
        # q=0.5, k=1e-27, f=2e9, d=1e6, w=50 -> 0.1 J
        s = one_pair_scenario(popularity=(0.5, 0.5))
        d = empty_decision(s)
        d.cache_hmd_mv[0, 0] = 1
        d.cache_hmd_sv[1, 0] = 1
        _, hmd = latency.energy_usage(s, d)
        assert math.isclose(hmd[0], 0.1, rel_tol=1e-9)


class TestFeasibility:
    def test_empty_decision_only_eq13(self):
        s = model.generate_scenario(model.micro_config(), 3)
        rep = latency.check_feasibility(s, empty_decision(s))
        assert rep.violated() == ["eq13"]

    def test_uncached_offload_flags_eq11(self):
        s = one_pair_scenario()
        d = served(s, offload_mes=(0, 0, 0))
        rep = latency.check_feasibility(s, d)
        assert "eq11" in rep.violated()
        assert rep["eq11"].offender == (0, 0, 0)

    def test_capacity_boundary_inclusive(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        # exactly at capacity: 1 SV at the MES
        d.cache_mes_sv[0, 0] = 1
        cap = float(s.sv_ratio * s.mv_sizes[0])
        snug = model.Scenario(**{
            **{f: getattr(s, f) for f in (
                "sbs_count", "hmd_count", "viewpoints", "sv_ratio",
                "channel_gain", "bandwidth_per_hmd", "noise_power",
                "orthogonality", "total_power", "mes_cpu_hz", "hmd_cpu_hz",
                "mes_energy_coeff", "hmd_energy_coeff",
                "hmd_cache_bits", "mes_energy_budget", "hmd_energy_budget",
                "backhaul_delay", "sbs_positions", "hmd_positions")},
            "mes_cache_bits": np.array([cap])})
        rep = latency.check_feasibility(snug, d)
        assert rep["eq4"].holds

    def test_report_covers_all_constraints_once(self):
        s = one_pair_scenario()
        rep = latency.check_feasibility(s, empty_decision(s))
        assert tuple(c.constraint for c in rep.checks) == latency.CONSTRAINT_IDS
        assert len(rep.to_records()) == 11
        assert "eq13" in rep.as_table()


class TestHitRatio:
    def test_all_local(self):
        s = one_pair_scenario()
        d = served(s, cache_hmd_sv=(0, 0))
        assert latency.cache_hit_ratio(s, d) == 1.0

    def test_all_cloud(self):
        s = one_pair_scenario()
        d = served(s, offload_cloud=(0, 0, 0))
        assert latency.cache_hit_ratio(s, d) == 0.0

    def test_weighted_mix(self):
        s = one_pair_scenario(popularity=(0.5, 0.3, 0.2))
        d = empty_decision(s)
        d.cache_hmd_sv[0, 0] = 1                     # local hit
        d.cache_mes_sv[1, 0] = 1                     # MES hit
        d.offload_mes[1, 0, 0] = 1
        d.offload_cloud[2, 0, 0] = 1                 # miss
        d.power = PowerAllocation(np.array([[1.0]]))
        assert math.isclose(latency.cache_hit_ratio(s, d), 0.8, rel_tol=1e-12)


def test_rate_monotonicity_of_objective():
    """For a fixed discrete decision the objective strictly decreases when
    any serving link's rate rises (checked by scaling the bandwidth)."""
    s = model.generate_scenario(model.micro_config(), 4)
    n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
    d = empty_decision(s)
    d.cache_mes_sv[0, 0] = 1
    d.offload_mes[0, 0, :] = 1
    d.cache_hmd_sv[1:, :] = 1
    p = np.zeros((m, u))
    p[0, :] = s.total_power / u
    d.power = PowerAllocation(p)
    rates = radio.rate_matrix(s, p)
    base = latency.objective(s, d, rates)
    boosted = latency.objective(s, d, rates * 1.25)
    assert boosted < base


def test_substituted_coordinates_never_raise_latency():
    """After the monotone substitution, flipping any coordinate up never
    increases the objective (feasibility coupling ignored)."""
    from vrmec import jcpt

    s = model.generate_scenario(model.micro_config(), 8)
    rng = np.random.default_rng(1)
    n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
    p = rng.uniform(0, s.total_power / u, size=(m, u))
    rates = radio.rate_matrix(s, p)
    for _ in range(25):
        d = empty_decision(s)
        for name in ("cache_mes_mv", "cache_mes_sv", "cache_hmd_mv",
                     "cache_hmd_sv", "offload_mes", "offload_cloud"):
            arr = getattr(d, name)
            arr[:] = rng.integers(0, 2, arr.shape)
        d.power = PowerAllocation(p)
        vec = jcpt.to_monotone(d)
        k = int(rng.integers(vec.size))
        if vec[k] == 1:
            continue
        base = latency.objective(s, d, rates)
        if not math.isfinite(base):
            continue
        vec2 = vec.copy()
        vec2[k] = 1
        d2 = jcpt.from_monotone(s, vec2)
        d2.power = PowerAllocation(p)
        assert latency.objective(s, d2, rates) <= base + 1e-12


def test_decision_json_round_trip():
    s = model.generate_scenario(model.micro_config(), 2)
    d = empty_decision(s)
    d.cache_mes_sv[0, 1] = 1
    d.offload_mes[0, 1, 0] = 1
    d.power = PowerAllocation(np.full((2, 2), 0.25))
    back = latency.decision_from_json(latency.decision_to_json(d))
    for name in ("cache_mes_mv", "cache_mes_sv", "cache_hmd_mv",
                 "cache_hmd_sv", "offload_mes", "offload_cloud"):
        assert np.array_equal(getattr(d, name), getattr(back, name))
    assert np.array_equal(d.power.p, back.power.p)
