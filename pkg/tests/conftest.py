import numpy as np
import pytest

from leobandit.config import ScenarioConfig, build_config
from leobandit.geometry import make_snapshot


@pytest.fixture
def config() -> ScenarioConfig:
    """Reference defaults with the deterministic channel surrogate (no extra loss terms)."""
    return build_config({"atmospheric_db": 0.0})


@pytest.fixture
def small_config() -> ScenarioConfig:
    """N=2, M=3, S=4, U=6: small enough for straight-loop oracles."""
    return build_config(
        {
            "n_satellites": 2,
            "cells_per_satellite": 3,
            "max_illuminated": 2,
            "n_subchannels": 4,
            "n_users": 6,
            "beam_radius_km": 50.0,
            "serving_radius_km": 150.0,
            "inter_sat_distance_km": 120.0,
            "orbit_topology": "homogeneous",
            "iterations": 100,
            "power_pool": 64,
            "seed": 7,
        }
    )


@pytest.fixture
def desk_config() -> ScenarioConfig:
    from leobandit.config import parse_config

    return parse_config(scale="desk", environ={}, overrides={"iterations": 300})


def single_satellite(users, altitude=1000e3, cells=((0.0, 0.0),), sat_velocity=(0.0, 0.0, 0.0), user_velocities=None):
    """A hand-built planar snapshot: one satellite above the origin, cells and users on the ground (m)."""
    users = np.array([[x, y, 0.0] for x, y in users], dtype=float).reshape(-1, 3)
    centers = np.array([[[x, y, 0.0] for x, y in cells]], dtype=float)
    velocities = np.zeros_like(users) if user_velocities is None else np.asarray(user_velocities, dtype=float)
    return make_snapshot(
        sat_positions=[[0.0, 0.0, altitude]],
        sat_velocities=[sat_velocity],
        user_positions=users,
        user_velocities=velocities,
        cell_centers=centers,
    )


@pytest.fixture
def one_satellite():
    return single_satellite
