"""Shared fixtures: common bodies, environments, and grids."""

import numpy as np
import pytest

from drmpc import dynamics


@pytest.fixture
def drag_free_env() -> dynamics.EnvironmentParams:
    return dynamics.EnvironmentParams(rho0=0.0)


@pytest.fixture
def leo_env() -> dynamics.EnvironmentParams:
    # representative ~550 km density for the exponential profile used here
    return dynamics.EnvironmentParams(rho0=2.2e-13)


@pytest.fixture
def sat_body() -> dynamics.BodyParams:
    return dynamics.BodyParams(mass=300.0)


@pytest.fixture
def debris_body() -> dynamics.BodyParams:
    return dynamics.BodyParams(mass=50.0)


@pytest.fixture
def fine_grid() -> dynamics.SimGrid:
    return dynamics.SimGrid(dt=0.01, control_period=1.0)


@pytest.fixture
def circular_leo_state() -> np.ndarray:
    mu = dynamics.MU_EARTH_KM3_S2
    a = 7000.0
    return np.array([a, 0.0, 0.0, 0.0, np.sqrt(mu / a), 0.0])
