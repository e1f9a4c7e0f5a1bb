"""SINR, rates, and the power allocation subproblem."""

import math

import numpy as np
import pytest

from vrmec import model, radio


def make_scenario(m, u, gains, n0=1e-9, zeta=1.0, w=1e6, p_total=1.0,
                  n_vp=1, popularity=None):
    if popularity is None:
        popularity = [1.0 / n_vp] * n_vp
    vps = tuple(model.Viewpoint(i + 1, 1e6, 50.0, popularity[i])
                for i in range(n_vp))
    return model.Scenario(
        m, u, vps, 4.0, np.array(gains, float), w, n0, zeta, p_total,
        1e10, 2e9, 1e-27, 1e-27, np.full(m, 1e9), np.full(u, 1e9),
        np.full(m, 1e9), np.full(u, 1e9), 0.1, np.zeros((m, 2)),
        np.zeros((u, 2)))


def test_sinr_single_link():
    s = make_scenario(1, 1, [[1e-6]])
    g = radio.sinr(s, radio.PowerAllocation(np.array([[1.0]])), 0, 0)
    assert math.isclose(g, 1000.0, rel_tol=1e-9)


def test_sinr_zero_power():
    s = make_scenario(1, 1, [[1e-6]])
    assert radio.sinr(s, radio.PowerAllocation(np.array([[0.0]])), 0, 0) == 0.0


def test_sinr_two_user_intra_cell():
    s = make_scenario(1, 2, [[1e-6, 1e-6]], zeta=1.0)
    g = radio.sinr(s, radio.PowerAllocation(np.array([[0.5, 0.5]])), 0, 0)
    expected = 0.5e-6 / (0.5e-6 + 1e-9)
    assert math.isclose(g, expected, rel_tol=1e-12)


def test_sinr_index_out_of_range():
    s = make_scenario(1, 1, [[1e-6]])
    with pytest.raises(IndexError):
        radio.sinr(s, radio.PowerAllocation(np.array([[1.0]])), 1, 0)


def test_link_rate_examples():
    s = make_scenario(1, 1, [[1e-6]])
    assert math.isclose(radio.link_rate(s, 3.0), 2e6, rel_tol=1e-12)
    assert radio.link_rate(s, 0.0) == 0.0
    s2 = make_scenario(1, 1, [[1e-6]], w=1e9 / 100)
    assert math.isclose(radio.link_rate(s2, 1000.0),
                        1e7 * math.log2(1001), rel_tol=1e-9)
    with pytest.raises(ValueError):
        radio.link_rate(s, -0.1)


def test_monotone_coupling():
    """Raising one link's power raises its own SINR and never raises
    anyone else's."""
    cfg = model.micro_config(sbs_count=3, hmd_count=3)
    s = model.generate_scenario(cfg, 2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.uniform(0, 0.3, size=(3, 3))
        m, u = int(rng.integers(3)), int(rng.integers(3))
        before = radio.sinr_matrix(s, p)
        bumped = p.copy()
        bumped[m, u] += 0.05
        after = radio.sinr_matrix(s, bumped)
        assert after[m, u] > before[m, u]
        others = np.ones_like(before, bool)
        others[m, u] = False
        assert np.all(after[others] <= before[others] + 1e-15)


def offloads_for_links(s, links):
    n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
    off = np.zeros((n, m_count, u_count), np.int8)
    for i, m, u in links:
        off[i, m, u] = 1
    return off, np.zeros((n, m_count, u_count), np.int8)


def test_allocate_power_single_link_full_budget():
    s = model.generate_scenario(model.micro_config(), 7)
    off_m, off_c = offloads_for_links(s, [(0, 0, 0)])
    pa = radio.allocate_power(s, off_m, off_c)
    assert pa.p[0, 0] == s.total_power
    assert pa.p.sum() == s.total_power


def test_allocate_power_no_active_links():
    s = model.generate_scenario(model.micro_config(), 7)
    n, m, u = s.viewpoint_count, s.sbs_count, s.hmd_count
    zeros = np.zeros((n, m, u), np.int8)
    assert not radio.allocate_power(s, zeros, zeros).p.any()


def test_allocate_power_budget_and_improvement():
    cfg = model.micro_config(sbs_count=3, hmd_count=4, viewpoint_count=5)
    rng = np.random.default_rng(11)
    for seed in range(6):
        s = model.generate_scenario(cfg, seed)
        n, m_count, u_count = s.viewpoint_count, s.sbs_count, s.hmd_count
        off_m = (rng.uniform(0, 1, (n, m_count, u_count)) < 0.2).astype(np.int8)
        off_c = np.zeros_like(off_m)
        pa = radio.allocate_power(s, off_m, off_c)
        assert radio.power_feasible(s, pa.p)
        # never worse than the equal-split start
        eq = radio.equal_split_power(s, off_m, off_c)
        assert _weighted_total(s, pa.p, off_m, off_c) \
            <= _weighted_total(s, eq.p, off_m, off_c) + 1e-12


def _weighted_total(s, p, off_m, off_c):
    demand = np.tensordot(s.popularity * s.sv_sizes, off_m + off_c, axes=(0, 0))
    rates = radio.rate_matrix(s, p)
    mask = demand > 0
    with np.errstate(divide="ignore"):
        vals = np.where(rates[mask] > 0, demand[mask] / rates[mask], np.inf)
    return float(vals.sum())


def test_allocate_power_symmetric_instance_matches_grid_oracle():
    """Symmetric 2x2 world: coordinate descent should find the symmetric
    optimum; a dense grid search provides the reference."""
    gains = [[1e-7, 1e-8], [1e-8, 1e-7]]
    s = make_scenario(2, 2, gains, n0=1e-9, zeta=0.1, w=1e7, n_vp=1)
    n, m_count, u_count = 1, 2, 2
    off_m = np.zeros((n, m_count, u_count), np.int8)
    off_m[0, 0, 0] = 1
    off_m[0, 1, 1] = 1
    off_c = np.zeros_like(off_m)
    pa = radio.allocate_power(s, off_m, off_c)
    assert abs(pa.p[0, 0] - pa.p[1, 1]) <= 1e-5
    # dense 2-D grid oracle over the two active powers
    best = np.inf
    for pa0 in np.linspace(1e-4, 1.0, 200):
        for pa1 in np.linspace(1e-4, 1.0, 200):
            p = np.array([[pa0, 0.0], [0.0, pa1]])
            best = min(best, _weighted_total(s, p, off_m, off_c))
    got = _weighted_total(s, pa.p, off_m, off_c)
    assert got <= best + 1e-3 * abs(best)


def test_grid_power_matches_exhaustive():
    s = model.generate_scenario(model.micro_config(), 3)
    off_m, off_c = offloads_for_links(s, [(0, 0, 0), (1, 0, 1), (2, 1, 1)])
    pa = radio.grid_power(s, off_m, off_c, levels=4)
    assert radio.power_feasible(s, pa.p)
    levels = np.linspace(0, s.total_power, 4)
    best = np.inf
    for a in levels:
        for b in levels:
            if a + b > s.total_power * (1 + 1e-9):
                continue
            for c in levels:
                p = np.zeros((2, 2))
                p[0, 0], p[0, 1], p[1, 1] = a, b, c
                best = min(best, _weighted_total(s, p, off_m, off_c))
    assert math.isclose(_weighted_total(s, pa.p, off_m, off_c), best,
                        rel_tol=1e-12)
