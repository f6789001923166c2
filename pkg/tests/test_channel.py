import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fransim.channel import (CHANNEL_COLUMNS, FAP, FUE, MRRH, ChannelParams, ChannelRealization, Topology,
                             TopologyConfig, draw_channel, dump_channel, dump_topology, generate_topology,
                             load_channel, pathloss, rate, sinr, thermal_noise, uniform_disc)
from fransim.errors import ConfigError, ContractError
from fransim.game import Allocation, PowerGrid

from conftest import small_topology, unit_params


def test_thermal_noise_default():
    # -174 dBm/Hz over 180 kHz: 10**(-17.4) mW/Hz * 1.8e5 Hz
    assert ChannelParams().noise_power == pytest.approx(10 ** (-17.4) * 1e-3 * 180e3, rel=1e-12)
    assert thermal_noise(1.0) == pytest.approx(10 ** (-20.4), rel=1e-12)


def test_pathloss_closed_forms():
    p = ChannelParams()
    assert pathloss(1.0, p) == p.reference_gain == 1e-3
    assert pathloss(10.0, ChannelParams(pathloss_exponent=4.0)) == pytest.approx(1e-3 * 1e-4, rel=1e-14)
    # below the clamp distance the gain stays at K
    assert pathloss(0.2, p) == pathloss(1.0, p)


@pytest.mark.parametrize("kwargs", [
    {"pathloss_exponent": 2.0}, {"reference_gain": 0.0}, {"noise_power": -1.0},
    {"bandwidth": 0.0}, {"n_subchannels": 0},
])
def test_channel_params_reject(kwargs):
    with pytest.raises(ConfigError, match="channel."):
        ChannelParams(**kwargs)


def test_degenerate_topology():
    topo = generate_topology(TopologyConfig(n_faps=0, n_macro_fues=1), np.random.default_rng(1))
    assert topo.faps == () and len(topo.fues) == 1
    ue = topo.fues[0]
    assert ue.serving_node == MRRH and math.hypot(*ue.position) <= topo.mrrh_radius


def test_topology_cardinality_and_containment():
    topo = generate_topology(TopologyConfig(n_faps=10, n_fues_per_fap=4), np.random.default_rng(2))
    assert len(topo.faps) == 10
    served = [u for u in topo.fues if u.serving_node != MRRH]
    assert len(served) == 40
    for u in served:
        fap = topo.faps[u.serving_node - 1]
        assert math.dist(u.position, fap.position) <= fap.radius * (1 + 1e-12)
    for f in topo.faps:
        assert math.hypot(*f.position) <= topo.mrrh_radius
        assert 0.0 <= f.cache_hit_ratio <= 1.0


def test_fap_mean_distance_uniform_disc():
    # oracle: for a uniform disc E[r] = 2R/3
    R = 500.0
    cfg = TopologyConfig(n_faps=100_000, n_fues_per_fap=0, n_macro_fues=0, min_fap_distance=0.0)
    topo = generate_topology(cfg, np.random.default_rng(3))
    r = np.array([math.hypot(*f.position) for f in topo.faps])
    assert abs(r.mean() / (2 * R / 3) - 1) < 0.01


def test_uniform_placement_ks():
    pts = uniform_disc(np.random.default_rng(4), 10_000, 7.0)
    r2 = (pts ** 2).sum(axis=1)
    assert stats.kstest(r2, stats.uniform(0, 49.0).cdf).pvalue > 0.01


def test_annulus_placement():
    pts = uniform_disc(np.random.default_rng(5), 10_000, 500.0, inner=100.0)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert r.min() >= 100.0 and r.max() <= 500.0
    # r**2 uniform on [inner**2, R**2]
    assert stats.kstest(r ** 2, stats.uniform(1e4, 25e4 - 1e4).cdf).pvalue > 0.01


def test_topology_invariants_rejected():
    faps = (FAP(1, (600.0, 0.0), 30.0, 0.5),)
    with pytest.raises(ConfigError, match="outside the MRRH"):
        Topology((0.0, 0.0), 500.0, faps, ())
    with pytest.raises(ConfigError, match="cache_hit"):
        Topology((0.0, 0.0), 500.0, (FAP(1, (0.0, 0.0), 30.0, 1.5),), ())
    with pytest.raises(ConfigError, match="outside its server"):
        Topology((0.0, 0.0), 500.0, (FAP(1, (0.0, 0.0), 30.0, 0.5),), (FUE(0, (40.0, 0.0), 1, 1.0),))
    with pytest.raises(ConfigError, match="fap_radius"):
        TopologyConfig(fap_radius=600.0).validate()


def test_fading_marginals():
    topo = small_topology([1, 1], n_faps=1)
    params = ChannelParams(n_subchannels=8)
    gains = np.concatenate([draw_channel(topo, params, np.random.default_rng(s)).gains.ravel()
                            / pathloss(topo.distances(), params)[:, :, None].repeat(8, axis=2).ravel()
                            for s in range(32_000)])
    assert gains.size >= 10 ** 6
    assert abs(gains.mean() - 1) < 0.02
    assert abs(gains.var() - 1) < 0.02


def test_fading_mean_large_sample():
    x = np.random.default_rng(6).standard_exponential(10 ** 6)
    assert abs(x.mean() - 1.0) < 0.01


def _alloc(entries, levels):
    grid = PowerGrid(levels)
    a = Allocation(grid)
    for f, k, lvl in entries:
        a.subchannel_of[f] = a.subchannel_of.get(f, ()) + (k,)
        a.power_of[(f, k)] = lvl
    return a


def test_sinr_single_transmitter():
    topo = small_topology([1])
    gains = np.full((1, 2, 1), 1e-6)
    a = _alloc([(0, 0, 0)], [1.0])
    s = sinr(0, 0, a, ChannelRealization(gains), ChannelParams(n_subchannels=1, noise_power=1e-9), topo)
    assert s == pytest.approx(1000.0, rel=1e-12)


def test_sinr_symmetric_interferer():
    topo = small_topology([1, 2])
    gains = np.full((2, 3, 1), 1e-3)
    a = _alloc([(0, 0, 0), (1, 0, 0)], [1.0])
    s = sinr(0, 0, a, ChannelRealization(gains), ChannelParams(n_subchannels=1, noise_power=1e-30), topo)
    assert s == pytest.approx(1.0, rel=1e-12)


def test_sinr_three_transmitters_hand_sum():
    topo = small_topology([1, 2, 0], n_faps=2)
    g = np.zeros((3, 3, 1))
    g[0, 1, 0], g[1, 1, 0], g[2, 1, 0] = 2.5e-7, 3.1e-9, 7.7e-10
    levels = [0.01, 0.05, 0.2]
    a = _alloc([(0, 0, 2), (1, 0, 1), (2, 0, 0)], levels)
    noise = 7.2e-16
    expected = 0.2 * 2.5e-7 / (noise + 0.05 * 3.1e-9 + 0.01 * 7.7e-10)
    got = sinr(0, 0, a, ChannelRealization(g), ChannelParams(n_subchannels=1, noise_power=noise), topo)
    assert abs(got / expected - 1) < 1e-12


def test_sinr_unassigned_pair():
    topo = small_topology([1])
    a = _alloc([(0, 0, 0)], [1.0])
    with pytest.raises(ContractError):
        sinr(0, 1, a, ChannelRealization(np.ones((1, 2, 2))), unit_params(2), topo)


def test_rate_values():
    assert rate(0.0, ChannelParams()) == 0.0
    assert rate(1.0, ChannelParams(bandwidth=180e3)) == pytest.approx(180e3, rel=1e-15)
    assert rate(3.0, unit_params(1)) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ContractError):
        rate(-0.1, ChannelParams())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1e3), min_size=2, max_size=2))
def test_rate_monotone(pair):
    lo, hi = sorted(pair)
    assert rate(lo, ChannelParams()) <= rate(hi, ChannelParams())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2 ** 31))
def test_sinr_nonincreasing_in_interferer_power(lo, hi, seed):
    lo, hi = min(lo, hi), max(lo, hi)
    rng = np.random.default_rng(seed)
    topo = small_topology([1, 2, 3], n_faps=3)
    ch = ChannelRealization(rng.uniform(1e-9, 1e-6, (3, 4, 1)))
    p = unit_params(1, noise=1e-12)
    levels = [0.001, 0.01, 0.05, 0.2]
    s_lo = sinr(0, 0, _alloc([(0, 0, 2), (1, 0, lo), (2, 0, 1)], levels), ch, p, topo)
    s_hi = sinr(0, 0, _alloc([(0, 0, 2), (1, 0, hi), (2, 0, 1)], levels), ch, p, topo)
    assert s_hi <= s_lo


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_sinr_matches_brute_force(n_tx, seed):
    rng = np.random.default_rng(seed)
    topo = small_topology(list(range(1, n_tx + 1)), n_faps=n_tx)
    g = rng.uniform(1e-10, 1e-6, (n_tx, n_tx + 1, 2))
    levels = [0.001, 0.02, 0.2]
    lv = rng.integers(0, 3, n_tx)
    a = _alloc([(i, 1, int(lv[i])) for i in range(n_tx)], levels)
    noise = 1e-13
    for f in range(n_tx):
        s = topo.fues[f].serving_node
        interf = math.fsum(levels[lv[u]] * g[u, s, 1] for u in range(n_tx) if u != f)
        expect = levels[lv[f]] * g[f, s, 1] / (noise + interf)
        got = sinr(f, 1, a, ChannelRealization(g), unit_params(2, noise=noise), topo)
        assert abs(got / expect - 1) < 1e-12


def test_dumps_round_trip():
    rng = np.random.default_rng(7)
    topo = generate_topology(TopologyConfig(n_faps=2, n_fues_per_fap=2, n_macro_fues=1), rng)
    ch = draw_channel(topo, ChannelParams(n_subchannels=3), rng)
    text = dump_channel(ch)
    assert text.splitlines()[0].split("\t") == list(CHANNEL_COLUMNS)
    assert np.array_equal(load_channel(text).gains, ch.gains)
    lines = dump_topology(topo).splitlines()
    assert len(lines) == 1 + 1 + 2 + 5
    assert all(len(ln.split("\t")) == 6 for ln in lines)
