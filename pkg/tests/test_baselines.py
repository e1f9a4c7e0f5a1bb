"""Baseline strategies and the greedy caching/power completion."""

import math

import numpy as np
import pytest

from vrmec import baselines, jcpt, latency, model, oracle
from vrmec.latency import check_feasibility, objective


def micro(seed=0, **overrides):
    return model.generate_scenario(model.micro_config(**overrides), seed)


class TestGreedyCachePower:
    def test_saturated_capacity_caches_all_svs(self):
        s = micro(hmd_cache_bits=1e9, hmd_energy_budget_j=1e6)
        n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
        zeros = np.zeros((n, m, u), np.int8)
        dec = baselines.greedy_cache_power(s, zeros, zeros)
        assert dec is not None
        assert (dec.cache_hmd_sv == 1).all()       # no projection delays left
        assert objective(s, dec) == 0.0

    def test_zero_capacity_cloud_only(self):
        s = micro(mes_cache_bits=0.0, hmd_cache_bits=0.0)
        n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
        off_c = np.zeros((n, m_count, u_count), np.int8)
        off_c[:, 0, :] = 1
        dec = baselines.greedy_cache_power(
            s, np.zeros_like(off_c), off_c)
        assert dec is not None
        assert check_feasibility(s, dec).ok
        assert not dec.cache_mes_mv.any() and not dec.cache_hmd_mv.any()

    def test_matches_exhaustive_cache_choice_on_toy(self):
        """For a fixed offload, greedy caching should match the best cache
        placement found by brute force over all placements."""
        cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=2,
                                 mes_cache_bits=9e6, hmd_cache_bits=2e6)
        for seed in range(3):
            s = model.generate_scenario(cfg, seed)
            n = s.viewpoint_count
            off_m = np.zeros((n, 1, 1), np.int8)
            off_m[:, 0, 0] = 1                      # everything via the MES
            off_c = np.zeros_like(off_m)
            dec = baselines.greedy_cache_power(s, off_m, off_c)
            assert dec is not None
            got = objective(s, dec)
            best = math.inf
            import itertools
            for mm in itertools.product((0, 1), repeat=n):
                for ms in itertools.product((0, 1), repeat=n):
                    d2 = dec.copy()
                    d2.cache_mes_mv[:, 0] = mm
                    d2.cache_mes_sv[:, 0] = ms
                    if not check_feasibility(s, d2).ok:
                        continue
                    best = min(best, objective(s, d2))
            assert got <= best + 1e-9 * best

    def test_rejects_bad_offloads(self):
        s = micro()
        n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
        off = np.zeros((n, m, u), np.int8)
        off[0, :, 0] = 1                            # two MES servers for one task
        with pytest.raises(ValueError):
            baselines.greedy_cache_power(s, off, np.zeros_like(off))

    def test_infeasible_mandatory_cache_returns_none(self):
        s = micro(mes_cache_bits=0.0)
        n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
        off_m = np.zeros((n, m, u), np.int8)
        off_m[0, 0, 0] = 1                          # needs a cache that fits nothing
        assert baselines.greedy_cache_power(s, off_m, np.zeros_like(off_m)) is None


class TestNearestOffloading:
    def test_saturated_local_caches(self):
        s = micro(hmd_cache_bits=1e9, hmd_energy_budget_j=1e6)
        res = baselines.solve_nearest_offloading(s)
        assert res.feasible and res.best_value == 0.0
        assert not res.best_decision.offload_mes.any()

    def test_zero_caches_all_cloud_via_nearest(self):
        s = micro(mes_cache_bits=0.0, hmd_cache_bits=0.0)
        res = baselines.solve_nearest_offloading(s)
        assert res.feasible
        d = res.best_decision
        assert not d.offload_mes.any()
        assert (d.offload_cloud.sum(axis=1) == 1).all()
        nearest = s.sbs_hmd_distances().argmin(axis=0)
        for u in range(s.hmd_count):
            assert d.offload_cloud[:, nearest[u], u].all()

    def test_single_association_structure(self):
        s = micro()
        res = baselines.solve_nearest_offloading(s)
        assert res.feasible
        d = res.best_decision
        nearest = s.sbs_hmd_distances().argmin(axis=0)
        used = (d.offload_mes + d.offload_cloud).sum(axis=0)  # (M, U)
        for u in range(s.hmd_count):
            others = [m for m in range(s.sbs_count) if m != nearest[u]]
            assert used[others, u].sum() == 0

    def test_matches_enumeration_on_single_association_space(self):
        """Toy world, one SBS: NO's space is every single-association
        decision, so it can never beat the oracle; on easy instances the
        popularity-greedy fill lands exactly on the optimum."""
        cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=2,
                                 mes_cache_bits=9e6, hmd_cache_bits=2e6)
        for seed in range(6):
            s = model.generate_scenario(cfg, seed)
            res = baselines.solve_nearest_offloading(s)
            ref = oracle.brute_force_solve(s, power_levels=12)
            assert res.feasible
            assert res.best_value >= ref.optimal_value - 1e-12
        for seed in (0, 2):   # greedy fill is provably optimal here
            s = model.generate_scenario(cfg, seed)
            res = baselines.solve_nearest_offloading(s)
            ref = oracle.brute_force_solve(s, power_levels=12)
            assert math.isclose(res.best_value, ref.optimal_value,
                                rel_tol=1e-9)

    def test_feasible_and_reported(self):
        for seed in range(3):
            s = model.generate_scenario(model.desk_config(), seed)
            res = baselines.solve_nearest_offloading(s)
            assert res.feasible
            assert check_feasibility(s, res.best_decision).ok


class TestPowerEqual:
    def test_equal_split_structure(self):
        s = micro()
        res = baselines.solve_power_equal(
            s, jcpt.SolverConfig(seed=0, restarts=1, max_iterations=3))
        assert res.feasible and res.algorithm == "pea"
        p = res.best_decision.power.p
        active = (res.best_decision.offload_mes.sum(axis=0)
                  + res.best_decision.offload_cloud.sum(axis=0)) >= 1
        for m in range(s.sbs_count):
            k = active[m].sum()
            if k:
                expected = s.total_power / k
                assert np.allclose(p[m, active[m]], expected, rtol=1e-12)
                assert not p[m, ~active[m]].any()

    def test_never_beats_jcpt_on_enumerable_instance(self):
        cfg = model.micro_config(sbs_count=1, hmd_count=2, viewpoint_count=2,
                                 mes_cache_bits=9e6, hmd_cache_bits=2e6)
        s = model.generate_scenario(cfg, 2)
        scfg = jcpt.SolverConfig(seed=0, restarts=2, max_iterations=200,
                                 tolerance=0.0)
        r_j = jcpt.jcpt_solve(s, scfg)
        r_p = baselines.solve_power_equal(s, scfg)
        assert r_j.best_value <= r_p.best_value + 1e-12


class TestPopularityFirst:
    def test_caches_pinned_sv_first(self):
        s = micro(mes_cache_bits=40e6)
        mm, ms, hm, hs = baselines.popularity_first_caches(s)
        sv_bits = s.sv_ratio * s.mv_sizes
        # most popular viewpoint cached in SV form wherever it fits
        assert (ms[0] == (sv_bits[0] <= s.mes_cache_bits)).all()
        res = baselines.solve_popularity_first(
            s, jcpt.SolverConfig(seed=0, restarts=1, max_iterations=3))
        assert res.feasible and res.algorithm == "pf"
        assert np.array_equal(res.best_decision.cache_mes_sv, ms)
        assert np.array_equal(res.best_decision.cache_mes_mv, mm)

    def test_ties_broken_by_index_at_uniform_popularity(self):
        s = micro(zipf_lambda=0.0, mes_cache_bits=9e6)
        mm, ms, hm, hs = baselines.popularity_first_caches(s)
        cached = np.nonzero(mm[:, 0] + ms[:, 0])[0]
        assert cached.size > 0
        assert cached[0] == 0                      # lowest index came first


class TestLru:
    def test_trace_determinism_and_shape(self):
        s = micro()
        t1 = baselines.generate_trace(s, seed=5)
        t2 = baselines.generate_trace(s, seed=5)
        assert np.array_equal(t1.viewpoint_ids, t2.viewpoint_ids)
        assert len(t1) == 20 * s.viewpoint_count * s.hmd_count
        counts = np.bincount(t1.hmd_ids, minlength=s.hmd_count)
        assert (counts == 20 * s.viewpoint_count).all()

    def test_unknown_viewpoint_rejected(self):
        s = micro()
        bad = baselines.RequestTrace(np.array([0]), np.array([99]))
        with pytest.raises(ValueError):
            baselines.solve_lru(s, bad)

    def test_single_viewpoint_trace_warms_to_full_hits(self):
        cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=1,
                                 mes_cache_bits=1e9, hmd_cache_bits=1e9)
        s = model.generate_scenario(cfg, 0)
        trace = baselines.generate_trace(s, steps=50, seed=0)
        res = baselines.solve_lru(s, trace)
        assert res.trace_metrics["trace_hit_ratio"] == 1.0

    def test_zero_capacity_never_hits(self):
        s = micro(mes_cache_bits=0.0, hmd_cache_bits=0.0)
        trace = baselines.generate_trace(s, steps=40, seed=1)
        res = baselines.solve_lru(s, trace)
        assert res.trace_metrics["trace_hit_ratio"] == 0.0

    def test_cyclic_thrash(self):
        # capacity for exactly one SV and a cyclic 3-viewpoint trace: the
        # classic LRU worst case never hits after any warmup
        cfg = model.micro_config(sbs_count=1, hmd_count=1, viewpoint_count=3,
                                 zipf_lambda=0.0, size_min_bits=1e6,
                                 size_max_bits=1e6, mes_cache_bits=4e6,
                                 hmd_cache_bits=4e6)
        s = model.generate_scenario(cfg, 0)
        cyc = np.tile([0, 1, 2], 30)
        trace = baselines.RequestTrace(np.zeros_like(cyc), cyc)
        res = baselines.solve_lru(s, trace)
        assert res.trace_metrics["trace_hit_ratio"] == 0.0

    def test_deterministic(self):
        s = micro()
        trace = baselines.generate_trace(s, seed=3)
        a = baselines.solve_lru(s, trace)
        b = baselines.solve_lru(s, trace)
        assert a.best_value == b.best_value
        assert a.trace_metrics == b.trace_metrics


def test_jcpt_dominates_baselines_on_enumerable_instance():
    cfg = model.micro_config(sbs_count=2, hmd_count=1, viewpoint_count=2,
                             mes_cache_bits=9e6, hmd_cache_bits=2e6)
    s = model.generate_scenario(cfg, 4)
    scfg = jcpt.SolverConfig(seed=0, restarts=2, max_iterations=2000,
                             tolerance=0.0, power_mode="grid", power_levels=4,
                             lean_children=True)
    r_j = jcpt.jcpt_solve(s, scfg)
    ref = oracle.brute_force_solve(s, power_levels=4)
    assert r_j.best_value == ref.optimal_value
    for solver in (baselines.solve_nearest_offloading,):
        r_b = solver(s)
        assert r_j.best_value <= r_b.best_value + 1e-12
