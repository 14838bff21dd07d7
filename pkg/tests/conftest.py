"""Shared scenario builders for the test suite."""

import numpy as np
import pytest

from ee_sim.scenario import build_scenario, random_scenario


def desk_scenario(slots=4, source=(10.0, 20.0), dest=(22.0, 6.0), **overrides):
    """Small deterministic instance: diagonal flight across the 30 m area."""
    return build_scenario(
        source_xy=source,
        dest_xy=dest,
        start_xy=(1.5, 1.5),
        end_xy=(28.5, 28.5),
        slots=slots,
        overrides=overrides or None,
    )


def seeded_random_scenario(seed, slots=4, **overrides):
    rng = np.random.default_rng(seed)
    return random_scenario(rng, slots=slots, overrides=overrides or None)


@pytest.fixture
def scenario4():
    return desk_scenario(slots=4)
