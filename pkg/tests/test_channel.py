import math

import numpy as np
import pytest
from scipy import optimize, special

from leobandit import channel, geometry
from leobandit.action_space import build_catalog, decode, random_arms
from leobandit.config import build_config
from leobandit.core import SPEED_OF_LIGHT
from leobandit.errors import DomainError


def _oracle_rates(snapshot, config, policy):
    """
    Straight loops over every (n, m, u, s) term of the link budget, independent of the vectorised code.
    Returns the per-satellite rates and the per-link SINR.
    """
    n_sat, n_cells, n_users, n_sub = policy.power.shape
    frequencies = [
        config.carrier_frequency_hz - config.bandwidth_hz / 2 + (s + 0.5) * config.bandwidth_hz / n_sub for s in range(n_sub)
    ]
    ka = 2 * math.pi * config.carrier_frequency_hz / SPEED_OF_LIGHT * config.aperture_radius_m
    limit = channel.theta_max(config)
    g_t, g_r = 10 ** (config.tx_gain_dbi / 10), 10 ** (config.rx_gain_dbi / 10)
    noise = 10 ** ((config.noise_psd_dbm_hz - 30) / 10) * config.bandwidth_hz / n_sub

    def gain(n, m, u):
        sat, user = snapshot.sat_positions[n], snapshot.user_positions[u]
        boresight = snapshot.cell_centers[n, m] - sat
        direction = user - sat
        theta = math.atan2(np.linalg.norm(np.cross(boresight, direction)), boresight @ direction)
        if theta > limit:
            return 0.0
        x = ka * math.sin(theta)
        return g_t if x == 0 else g_t * 4 * (special.j1(x) / x) ** 2

    def h(n, u, s):
        d = np.linalg.norm(snapshot.user_positions[u] - snapshot.sat_positions[n])
        loss = 20 * math.log10(4 * math.pi * d * frequencies[s] / SPEED_OF_LIGHT) + config.atmospheric_db
        return 10 ** (-loss / 10)

    def speed(n, u):
        offset = snapshot.user_positions[u] - snapshot.sat_positions[n]
        relative = snapshot.user_velocities[u] - snapshot.sat_velocities[n]
        return abs(offset @ relative) / np.linalg.norm(offset)

    per_leo = [0.0] * n_sat
    sinrs = np.zeros(policy.power.shape)
    for n in range(n_sat):
        for m in range(n_cells):
            for u in range(n_users):
                for s in range(n_sub):
                    if not (policy.phi[n, m, u] and policy.rho[n, m, s]):
                        continue
                    interference = 0.0
                    for n2 in range(n_sat):
                        for m2 in range(n_cells):
                            if m2 == m:
                                continue
                            for u2 in range(n_users):
                                if u2 == u or not (policy.phi[n2, m2, u2] and policy.rho[n2, m2, s]):
                                    continue
                                interference += policy.power[n2, m2, u2, s] * gain(n2, m2, u) * g_r * h(n, u, s)
                    shift = frequencies[s] * speed(n, u) * n_sub ** 2 / (SPEED_OF_LIGHT * config.bandwidth_hz)
                    double_sum = sum(
                        policy.power[n, m, u, s2] / (s2 - s1) ** 2
                        for s1 in range(n_sub)
                        for s2 in range(n_sub)
                        if s1 != s2
                    )
                    doppler = shift ** 2 / (2 * n_sub) * double_sum
                    signal = policy.power[n, m, u, s] * gain(n, m, u) * g_r * h(n, u, s)
                    ratio = signal / (interference + config.doppler_compensation * doppler + noise)
                    sinrs[n, m, u, s] = ratio
                    per_leo[n] += config.bandwidth_hz / n_sub * math.log2(1 + ratio)
    return per_leo, sinrs


@pytest.fixture
def single_channel():
    return build_config({"n_subchannels": 1, "cells_per_satellite": 1, "max_illuminated": 1, "atmospheric_db": 0.0})


def test_gain_on_boresight_is_the_peak_gain(config):
    assert channel.beam_gain(0.3, 0.3, config) == config.tx_gain
    assert channel.beam_gain(1e-9, 0.0, config) == pytest.approx(config.tx_gain, rel=1e-6)


def test_gain_vanishes_at_the_first_bessel_root(config):
    root = optimize.brentq(special.j1, 3.0, 4.5, xtol=1e-14)
    assert root == pytest.approx(3.8317, abs=1e-4)
    delta = math.asin(root / (config.wave_number * config.aperture_radius_m))
    assert channel.beam_gain(delta, 0.0, config) < 1e-20 * config.tx_gain


def test_gain_is_zero_beyond_theta_max(config):
    limit = channel.theta_max(config)
    assert channel.beam_gain(limit * 1.01, 0.0, config) == 0.0
    assert channel.beam_gain(limit * 0.5, 0.0, config) > 0.0
    assert channel.beam_gain(0.0, limit * 1.01, config) == 0.0


def test_gain_is_non_increasing_on_the_main_lobe(config):
    edge = math.asin(channel.FIRST_J1_ZERO / (config.wave_number * config.aperture_radius_m))
    gains = channel.beam_gain(np.linspace(0.0, edge, 200), 0.0, config)
    assert np.all(np.diff(gains) <= 1e-9 * config.tx_gain)


def test_free_space_pathloss(config):
    assert channel.pathloss_db(1e6, 28e9, config) == pytest.approx(181.39, abs=5e-3)
    doubled = channel.pathloss_db(2e6, 28e9, config) - channel.pathloss_db(1e6, 28e9, config)
    assert doubled == pytest.approx(20 * math.log10(2), rel=1e-12)


def test_surrogate_terms_add_in_db(config):
    atmospheric = config.replace(atmospheric_db=0.5)
    delta = channel.pathloss_db(1e6, 28e9, atmospheric) - channel.pathloss_db(1e6, 28e9, config)
    assert delta == pytest.approx(0.5, rel=1e-12)
    assert channel.pathloss_db(1e6, 28e9, config, shadow_db=3.0) == pytest.approx(
        channel.pathloss_db(1e6, 28e9, config) + 3.0
    )


@pytest.mark.parametrize("distance", [0.0, -1.0])
def test_pathloss_needs_a_positive_distance(config, distance):
    with pytest.raises(DomainError):
        channel.pathloss_db(distance, 28e9, config)


def test_shadowing_is_seeded(config):
    shadowed = config.replace(shadow_sigma_db=4.0, seed=5)
    np.testing.assert_array_equal(channel.shadowing_db(shadowed, 2, 3), channel.shadowing_db(shadowed, 2, 3))
    assert np.all(channel.shadowing_db(config, 2, 3) == 0.0)


def test_subchannel_grid_spans_the_band(config):
    frequencies = channel.subchannel_frequencies(config)
    assert len(frequencies) == 30
    np.testing.assert_allclose(np.diff(frequencies), 8e6, rtol=1e-9)
    assert frequencies[0] - 4e6 == pytest.approx(28e9 - 120e6)
    assert frequencies[-1] + 4e6 == pytest.approx(28e9 + 120e6)


def test_noise_power(config):
    assert 10 * math.log10(config.noise_power_w * 1e3) == pytest.approx(-104.97, abs=5e-3)


def test_two_beam_inter_beam_interference_matches_a_hand_sum(single_channel, one_satellite):
    snapshot = one_satellite([(0.0, 0.0), (60e3, 0.0)], cells=((0.0, 0.0), (60e3, 0.0)))
    env = channel.LinkEnvironment.build(snapshot, single_channel)
    policy = channel.AllocationPolicy.empty(1, 2, 2, 1)
    policy.phi[0, 0, 0] = policy.phi[0, 1, 1] = True
    policy.rho[0, 0, 0] = policy.rho[0, 1, 0] = True
    policy.power[0, 0, 0, 0], policy.power[0, 1, 1, 0] = 2.0, 3.0

    theta = geometry.off_boresight_angle(snapshot, 0, 1, 0)
    expected = 3.0 * channel.beam_gain(theta, 0.0, single_channel) * single_channel.rx_gain * env.channel_gains[0, 0, 0]
    assert expected > 0.0
    assert channel.interference_ibi(env, policy, 0, 0, 0, 0) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(channel.evaluate(env, policy).ibi[0, 0, 0, 0], expected, rtol=1e-12)

    # disjoint sub-channels or a single beam: nothing leaks
    policy.rho[0, 1, 0] = False
    assert channel.interference_ibi(env, policy, 0, 0, 0, 0) == 0.0
    policy.rho[0, 1, 0], policy.phi[0, 1, 1] = True, False
    assert channel.interference_ibi(env, policy, 0, 0, 0, 0) == 0.0


def test_single_satellite_has_no_inter_satellite_interference(small_config):
    config = small_config.replace(n_satellites=1)
    snapshot = geometry.build_constellation(config)
    catalog = build_catalog(config)
    rng = np.random.default_rng(0)
    env = channel.LinkEnvironment.build(snapshot, config)
    policy = decode([random_arms(catalog, rng)], snapshot, catalog, config)
    assert np.all(channel.evaluate(env, policy).isi == 0.0)


def test_far_apart_satellites_do_not_interfere(small_config):
    config = small_config.replace(inter_sat_distance_km=3000.0)
    snapshot = geometry.build_constellation(config)
    catalog = build_catalog(config)
    env = channel.LinkEnvironment.build(snapshot, config)
    policy = decode([catalog.anchors] * 2, snapshot, catalog, config)
    assert np.all(channel.evaluate(env, policy).isi == 0.0)


def test_inter_satellite_interference_matches_scalar_terms(small_config):
    snapshot = geometry.build_constellation(small_config)
    env = channel.LinkEnvironment.build(snapshot, small_config)
    rng = np.random.default_rng(1)
    shape = (2, 3, 6, 4)
    policy = channel.AllocationPolicy(
        power=rng.uniform(0.0, 2.0, size=shape),
        phi=rng.random(shape[:3]) < 0.5,
        rho=rng.random((2, 3, 4)) < 0.5,
    )
    terms = channel.evaluate(env, policy)
    for index in np.ndindex(*shape):
        assert terms.ibi[index] == pytest.approx(channel.interference_ibi(env, policy, *index), rel=1e-12, abs=1e-300)
        assert terms.isi[index] == pytest.approx(channel.interference_isi(env, policy, *index), rel=1e-12, abs=1e-300)
        assert terms.doppler[index] == pytest.approx(
            channel.interference_doppler(env, policy, *index), rel=1e-12, abs=1e-300
        )
        assert terms.sinr[index] == pytest.approx(channel.sinr(env, policy, *index), rel=1e-12, abs=1e-300)


def test_doppler_double_sum(one_satellite):
    config = build_config({"n_subchannels": 3, "cells_per_satellite": 1, "max_illuminated": 1})
    snapshot = one_satellite([(0.0, 0.0)], sat_velocity=(0.0, 0.0, 8000.0))
    env = channel.LinkEnvironment.build(snapshot, config)
    policy = channel.AllocationPolicy.empty(1, 1, 1, 3)
    policy.phi[0, 0, 0] = True
    policy.rho[0, 0, :] = True
    policy.power[0, 0, 0, :] = 2.0

    frequencies = channel.subchannel_frequencies(config)
    for s in range(3):
        shift = frequencies[s] * 8000.0 * 9 / (SPEED_OF_LIGHT * config.bandwidth_hz)
        expected = shift ** 2 / 6 * 2.0 * (1 + 0.25 + 1 + 1 + 0.25 + 1)
        assert channel.interference_doppler(env, policy, 0, 0, 0, s) == pytest.approx(expected, rel=1e-12)


def test_doppler_vanishes_for_one_subchannel_or_no_motion(single_channel, one_satellite):
    moving = one_satellite([(0.0, 0.0)], sat_velocity=(0.0, 0.0, 8000.0))
    policy = channel.AllocationPolicy.empty(1, 1, 1, 1)
    policy.phi[0, 0, 0] = policy.rho[0, 0, 0] = True
    policy.power[0, 0, 0, 0] = 5.0
    assert channel.interference_doppler(channel.LinkEnvironment.build(moving, single_channel), policy, 0, 0, 0, 0) == 0.0

    config = build_config({"n_subchannels": 3, "cells_per_satellite": 1, "max_illuminated": 1})
    still = one_satellite([(0.0, 0.0)])
    policy = channel.AllocationPolicy.empty(1, 1, 1, 3)
    policy.phi[0, 0, 0] = True
    policy.rho[0, 0, :] = True
    policy.power[0, 0, 0, :] = 1.0
    assert channel.interference_doppler(channel.LinkEnvironment.build(still, config), policy, 0, 0, 0, 1) == 0.0


def _unit_sinr_policy(env, config):
    policy = channel.AllocationPolicy.empty(1, 1, 1, config.n_subchannels)
    policy.phi[0, 0, 0] = policy.rho[0, 0, 0] = True
    policy.power[0, 0, 0, 0] = config.noise_power_w / (env.tx_gains[0, 0, 0] * config.rx_gain * env.channel_gains[0, 0, 0])
    return policy


def test_signal_equal_to_noise_gives_unit_sinr(single_channel, one_satellite):
    env = channel.LinkEnvironment.build(one_satellite([(0.0, 0.0)]), single_channel)
    policy = _unit_sinr_policy(env, single_channel)
    assert channel.sinr(env, policy, 0, 0, 0, 0) == pytest.approx(1.0, rel=1e-12)


def test_unit_sinr_link_carries_one_bit_per_hertz(one_satellite):
    config = build_config({"cells_per_satellite": 1, "max_illuminated": 1, "doppler_compensation": 0.0})
    env = channel.LinkEnvironment.build(one_satellite([(0.0, 0.0)]), config)
    report = channel.rates(env, _unit_sinr_policy(env, config))
    assert report.total == pytest.approx(8e6, rel=1e-9)
    assert report.per_user[0] == pytest.approx(8e6, rel=1e-9)


def test_unserved_links_have_zero_sinr(single_channel, one_satellite):
    env = channel.LinkEnvironment.build(one_satellite([(0.0, 0.0)]), single_channel)
    policy = channel.AllocationPolicy.empty(1, 1, 1, 1)
    policy.power[0, 0, 0, 0] = 1.0
    assert channel.sinr(env, policy, 0, 0, 0, 0) == 0.0
    assert channel.rates(env, channel.AllocationPolicy.empty(1, 1, 1, 1)).total == 0.0


def test_rates_match_the_straight_loop_oracle(small_config):
    config = small_config.replace(atmospheric_db=0.0)
    snapshot = geometry.propagate(geometry.build_constellation(config), config, 5)
    catalog = build_catalog(config)
    rng = np.random.default_rng(11)
    env = channel.LinkEnvironment.build(snapshot, config)
    for _ in range(5):
        policy = decode([random_arms(catalog, rng) for _ in range(2)], snapshot, catalog, config)
        report = channel.rates(env, policy)
        expected, _ = _oracle_rates(snapshot, config, policy)
        np.testing.assert_allclose(report.per_leo, expected, rtol=1e-9, atol=1e-6)
        assert report.total == pytest.approx(sum(expected), rel=1e-9, abs=1e-6)
        assert report.per_user.sum() == pytest.approx(report.total, rel=1e-12)


def _random_instance(rng):
    """Random dimensions with N * M * U * S <= 200, satellites over random cells and users near them."""
    while True:
        n_sat, n_cells, n_users, n_sub = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 7), rng.integers(1, 6)
        if n_sat * n_cells * n_users * n_sub <= 200:
            break
    config = build_config(
        {
            "n_satellites": int(n_sat),
            "cells_per_satellite": int(n_cells),
            "max_illuminated": 1,
            "n_subchannels": int(n_sub),
            "n_users": int(n_users),
            "atmospheric_db": 0.0,
            "doppler_compensation": float(rng.uniform(0.0, 0.5)),
        }
    )
    nadirs = np.column_stack([rng.uniform(-200e3, 200e3, size=(n_sat, 2)), np.zeros(n_sat)])
    sats = nadirs + np.column_stack([np.zeros((n_sat, 2)), rng.uniform(500e3, 1500e3, size=n_sat)])
    offsets = rng.uniform(-100e3, 100e3, size=(n_sat, n_cells, 2))
    centers = nadirs[:, None, :] + np.concatenate([offsets, np.zeros((n_sat, n_cells, 1))], axis=2)
    anchors = centers.reshape(-1, 3)[rng.integers(0, n_sat * n_cells, size=n_users)]
    users = anchors + np.column_stack([rng.normal(0.0, 20e3, size=(n_users, 2)), np.zeros(n_users)])
    snapshot = geometry.make_snapshot(
        sat_positions=sats,
        sat_velocities=np.column_stack([rng.uniform(-8e3, 8e3, size=(n_sat, 2)), np.zeros(n_sat)]),
        user_positions=users,
        user_velocities=np.column_stack([rng.uniform(-30.0, 30.0, size=(n_users, 2)), np.zeros(n_users)]),
        cell_centers=centers,
    )
    shape = (n_sat, n_cells, n_users, n_sub)
    policy = channel.AllocationPolicy(
        power=rng.uniform(0.1, 10.0, size=shape),
        phi=rng.random(shape[:3]) < 0.6,
        rho=rng.random((n_sat, n_cells, n_sub)) < 0.6,
    )
    return snapshot, config, policy


@pytest.mark.parametrize("seed", range(100))
def test_random_instances_match_the_straight_loop_oracle(seed):
    snapshot, config, policy = _random_instance(np.random.default_rng(seed))
    env = channel.LinkEnvironment.build(snapshot, config)
    expected_rates, expected_sinr = _oracle_rates(snapshot, config, policy)
    np.testing.assert_allclose(channel.evaluate(env, policy).sinr, expected_sinr, rtol=1e-9, atol=0.0)
    report = channel.rates(env, policy)
    np.testing.assert_allclose(report.per_leo, expected_rates, rtol=1e-9, atol=1e-6)
    assert report.total == pytest.approx(sum(expected_rates), rel=1e-9, abs=1e-6)


def test_channel_gains_are_positive(small_config):
    env = channel.LinkEnvironment.build(geometry.build_constellation(small_config), small_config)
    assert np.all(env.channel_gains > 0.0)


def test_gating_and_monotonicity(small_config):
    snapshot = geometry.build_constellation(small_config)
    env = channel.LinkEnvironment.build(snapshot, small_config)
    rng = np.random.default_rng(3)
    shape = (2, 3, 6, 4)
    phi = np.zeros(shape[:3], dtype=bool)
    served = [(0, 0, 0), (0, 1, 1), (1, 0, 2), (1, 2, 3)]
    for index in served:
        phi[index] = True
    policy = channel.AllocationPolicy(power=rng.uniform(0.5, 2.0, size=shape) * phi[..., None], phi=phi, rho=np.ones((2, 3, 4), bool))
    base = channel.evaluate(env, policy)

    louder = policy.power.copy()
    louder[1, 0, 2, :] *= 10.0
    stronger = channel.evaluate(env, channel.AllocationPolicy(louder, phi, policy.rho))
    for n, m, u in served[:2]:
        assert np.all(stronger.sinr[n, m, u] <= base.sinr[n, m, u] * (1 + 1e-12))

    gated = policy.rho.copy()
    gated[1, 0, :] = False
    quiet = channel.evaluate(env, channel.AllocationPolicy(policy.power, phi, gated))
    assert np.all(quiet.isi[0] <= base.isi[0] + 1e-300)

    compensated = small_config.replace(doppler_compensation=0.0)
    free = channel.evaluate(channel.LinkEnvironment.build(snapshot, compensated), policy)
    assert np.all(free.sinr >= base.sinr * (1 - 1e-12))

    noisy = small_config.replace(noise_psd_dbm_hz=-170.0)
    louder_noise = channel.evaluate(channel.LinkEnvironment.build(snapshot, noisy), policy)
    for n, m, u in served:
        assert np.all(louder_noise.sinr[n, m, u] < base.sinr[n, m, u])


def test_interference_and_rates_are_non_negative(small_config):
    snapshot = geometry.build_constellation(small_config)
    catalog = build_catalog(small_config)
    env = channel.LinkEnvironment.build(snapshot, small_config)
    rng = np.random.default_rng(5)
    policy = decode([random_arms(catalog, rng) for _ in range(2)], snapshot, catalog, small_config)
    terms = channel.evaluate(env, policy)
    for array in (terms.ibi, terms.isi, terms.doppler, terms.sinr):
        assert np.all(array >= 0.0)
    assert np.all(channel.rates(env, policy).per_leo >= 0.0)
