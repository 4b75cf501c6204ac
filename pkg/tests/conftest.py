import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from apfsmc.config import load_scenario

# first calls trigger numba compilation, so per-example deadlines are meaningless
settings.register_profile("apfsmc", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("apfsmc")


@pytest.fixture(scope="session")
def default_cfg():
    return load_scenario("default")


@pytest.fixture
def short_cfg():
    """Scenario factory with a short horizon; extra ``key=value`` overrides pass through."""

    def make(duration=30.0, *overrides):
        return load_scenario("default", [f"sim.duration={duration}", *overrides])

    return make


def unit_quats():
    from hypothesis import strategies as st

    comp = st.floats(-1.0, 1.0, allow_nan=False)
    return (
        st.tuples(comp, comp, comp, comp)
        .map(np.array)
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
        .map(lambda v: v / np.linalg.norm(v))
    )


def unit_vectors():
    from hypothesis import strategies as st

    comp = st.floats(-1.0, 1.0, allow_nan=False)
    return (
        st.tuples(comp, comp, comp)
        .map(np.array)
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
        .map(lambda v: v / np.linalg.norm(v))
    )
