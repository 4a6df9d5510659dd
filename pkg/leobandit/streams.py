"""Seeded, independent random streams for reproducible simulations."""
import zlib

import numpy as np

# stream names used across the package; every consumer owns its stream
USERS = "users"
SHADOWING = "shadowing"
CATALOG = "catalog"
AGENTS = "agents"


def make_rng(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """
    Create a generator for `stream` derived from the scenario seed.

    Streams are independent of each other and of the order in which they are created, so
    adding a consumer never shifts the draws of another one.

    Args:
        seed (int): The scenario seed.
        stream (str): The stream name.
        *keys (int): Extra integer keys (e.g. a satellite index).

    Returns:
        numpy.random.Generator: The seeded generator.
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(stream.encode("utf-8")), *keys])
