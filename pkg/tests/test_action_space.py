import math

import numpy as np
import pytest

from leobandit import geometry
from leobandit.action_space import (
    BEAM,
    CHANNEL,
    POWER,
    ArmTriple,
    build_catalog,
    decode,
    random_arms,
    validate_policy,
)
from leobandit.channel import AllocationPolicy
from leobandit.config import build_config
from leobandit.errors import ConfigurationError


def test_beam_arms_are_sampled_down_to_the_pool(config):
    assert math.comb(19, 15) == 3876
    catalog = build_catalog(config)
    assert catalog.size(BEAM) == config.beam_pool == 512
    assert len({tuple(arm) for arm in catalog.beam_arms.tolist()}) == 512

    everything = build_catalog(config.replace(beam_pool=4000))
    assert everything.size(BEAM) == 3876


def test_contiguous_channel_compositions(small_config):
    catalog = build_catalog(small_config)
    blocks = sorted(tuple(np.bincount(arm, minlength=2).tolist()) for arm in catalog.channel_arms)
    assert blocks == [(1, 3), (2, 2), (3, 1)]
    assert catalog.describe(CHANNEL, catalog.balanced_channel) == "blocks 2-2"


def test_full_illumination_leaves_a_single_beam_arm():
    config = build_config({"max_illuminated": 19, "power_offsets_db": "0", "power_off_level": False})
    catalog = build_catalog(config)
    assert catalog.size(BEAM) == 1
    assert catalog.beam_arms[0].tolist() == list(range(19))
    assert catalog.size(POWER) == 1


def test_catalog_invariants(config):
    catalog = build_catalog(config)
    slots = config.beam_slots
    for arm in catalog.beam_arms:
        assert 1 <= len(set(arm.tolist())) == slots <= config.cells_per_satellite
        assert list(arm) == sorted(arm)
    for arm in catalog.channel_arms:
        assert len(arm) == config.n_subchannels
        assert np.bincount(arm, minlength=slots).min() >= 1
        assert np.all(np.diff(arm) >= 0)  # contiguous blocks
    assert np.all(catalog.power_arms <= config.p_beam_w * (1 + 1e-12))
    assert np.all(catalog.power_arms.sum(axis=1) <= config.p_leo_w * (1 + 1e-12))


def test_anchor_arms_are_always_present(config):
    catalog = build_catalog(config)
    assert catalog.power_levels_dbm[catalog.full_power].tolist() == [config.p_beam_dbm] * config.beam_slots
    assert catalog.beam_arms[catalog.full_beams].tolist() == list(range(config.beam_slots))
    balanced = np.bincount(catalog.channel_arms[catalog.balanced_channel], minlength=config.beam_slots)
    assert balanced.max() - balanced.min() <= 1


def test_catalog_is_seeded(config):
    a, b = build_catalog(config), build_catalog(config)
    np.testing.assert_array_equal(a.beam_arms, b.beam_arms)
    np.testing.assert_array_equal(a.power_arms, b.power_arms)
    other = build_catalog(config, seed=99)
    assert not np.array_equal(a.beam_arms, other.beam_arms)


def test_fewer_subchannels_than_beams_is_rejected():
    with pytest.raises(ConfigurationError) as error:
        build_config({"n_subchannels": 10, "max_illuminated": 15})
    assert error.value.field == "n_subchannels"


def test_no_power_level_fitting_the_budget_is_rejected():
    config = build_config({"p_leo_dbm": 30.0, "power_off_level": False})
    with pytest.raises(ConfigurationError) as error:
        build_catalog(config)
    assert error.value.field == "p_leo_dbm"


def test_power_anchor_backs_off_to_fit_the_budget():
    # 15 beams at 34 dBm need 37.7 W, only 30 dBm fits into 20 W
    config = build_config({"p_leo_dbm": 10 * math.log10(20.0) + 30.0})
    catalog = build_catalog(config)
    assert catalog.power_levels_dbm[catalog.full_power].tolist() == [30.0] * 15


def test_single_user_gets_an_equal_split(one_satellite):
    config = build_config(
        {
            "n_subchannels": 3,
            "cells_per_satellite": 1,
            "max_illuminated": 1,
            "power_offsets_db": "0",
            "power_off_level": False,
        }
    )
    catalog = build_catalog(config)
    snapshot = one_satellite([(0.0, 0.0)])
    policy = decode([ArmTriple(0, 0, 0)], snapshot, catalog, config)
    np.testing.assert_allclose(policy.power[0, 0, 0], [10.0 / 3] * 3, rtol=1e-12)
    assert policy.phi[0, 0, 0] and policy.rho[0, 0].all()


def test_empty_cell_transmits_nothing(one_satellite):
    config = build_config({"n_subchannels": 4, "cells_per_satellite": 2, "max_illuminated": 2})
    catalog = build_catalog(config)
    snapshot = one_satellite([(0.0, 0.0)], cells=((0.0, 0.0), (300e3, 0.0)))
    policy = decode([catalog.anchors], snapshot, catalog, config)
    assert policy.power[0, 1].sum() == 0.0
    assert not policy.phi[0, 1].any()
    assert policy.rho[0, 1].any()
    assert validate_policy(policy, config).ok


def test_users_share_subchannels_round_robin(one_satellite):
    config = build_config({"n_subchannels": 4, "cells_per_satellite": 1, "max_illuminated": 1})
    catalog = build_catalog(config)
    snapshot = one_satellite([(0.0, 0.0), (1e3, 0.0)])
    policy = decode([catalog.anchors], snapshot, catalog, config)
    served = policy.power[0, 0] > 0
    assert served[0].tolist() == [True, False, True, False]
    assert served[1].tolist() == [False, True, False, True]


def test_crowded_cells_rotate_their_users(one_satellite):
    config = build_config({"n_subchannels": 2, "cells_per_satellite": 1, "max_illuminated": 1})
    catalog = build_catalog(config)
    users = [(1e3 * k, 0.0) for k in range(5)]
    served = set()
    for t in range(5):
        snapshot = geometry.propagate(one_satellite(users), config, t)
        policy = decode([catalog.anchors], snapshot, catalog, config)
        served.update(np.flatnonzero(policy.phi[0, 0]).tolist())
        assert policy.phi[0, 0].sum() == 2
    assert served == set(range(5))


def test_random_decodes_are_always_valid(small_config):
    snapshot = geometry.build_constellation(small_config)
    catalog = build_catalog(small_config)
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        arms = [random_arms(catalog, rng) for _ in range(small_config.n_satellites)]
        result = validate_policy(decode(arms, snapshot, catalog, small_config), small_config)
        assert result.ok, result.violations


def test_decode_is_deterministic(small_config):
    snapshot = geometry.build_constellation(small_config)
    catalog = build_catalog(small_config)
    arms = [ArmTriple(3, 1, 2), ArmTriple(0, 2, 1)]
    a = decode(arms, snapshot, catalog, small_config)
    b = decode(arms, snapshot, catalog, small_config)
    np.testing.assert_array_equal(a.power, b.power)
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.rho, b.rho)


def test_random_arms_stay_in_bounds(config):
    catalog = build_catalog(config)
    rng = np.random.default_rng(0)
    for _ in range(200):
        arms = random_arms(catalog, rng)
        assert 0 <= arms.power < catalog.size(POWER)
        assert 0 <= arms.beam < catalog.size(BEAM)
        assert 0 <= arms.channel < catalog.size(CHANNEL)


def test_empty_policy_is_valid(config):
    assert validate_policy(AllocationPolicy.empty(2, 3, 4, 5), config).ok


def test_budgets_are_closed_intervals():
    config = build_config({"p_beam_dbm": 60.0, "cells_per_satellite": 1, "max_illuminated": 1, "n_subchannels": 1})
    policy = AllocationPolicy.empty(1, 1, 1, 1)
    policy.phi[0, 0, 0] = policy.rho[0, 0, 0] = True
    policy.power[0, 0, 0, 0] = config.p_leo_w
    assert validate_policy(policy, config).ok

    policy.power[0, 0, 0, 0] = config.p_leo_w * 1.001
    assert validate_policy(policy, config).constraints() == ["C1", "C2"]


def test_shared_subchannel_violates_c4(config):
    policy = AllocationPolicy.empty(1, 3, 2, 4)
    policy.rho[0, 0, 2] = policy.rho[0, 1, 2] = True
    result = validate_policy(policy, config)
    assert not result
    assert result.violations[0].constraint == "C4"
    assert result.violations[0].index == (0, 2)


def test_other_violations(config):
    policy = AllocationPolicy.empty(1, 2, 2, 2)
    policy.phi[0, 0, 0] = policy.phi[0, 1, 0] = True  # user 0 on two beams
    policy.rho[0, 0, 0] = True
    policy.power[0, 0, 1, 0] = 1.0  # user 1 is not served
    result = validate_policy(policy, config)
    assert result.constraints() == ["C3", "C5", "POWER_GATE"]
    assert str(result.violations[1]) == "C5 at (0, 1, 0)"


def test_complexity_orders(small_config):
    catalog = build_catalog(small_config)
    sizes = [catalog.size(resource) for resource in (POWER, BEAM, CHANNEL)]
    orders = catalog.complexity_orders()
    assert orders["macro"] == sizes[0] * sizes[1] * sizes[2]
    assert orders["micro"] == max(sizes)
    assert orders["exhaustive_log10"] == pytest.approx(math.log10(sizes[0]) + sizes[1] * sizes[2] * math.log10(2))
