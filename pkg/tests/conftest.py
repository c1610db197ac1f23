import math

import pytest

from srpsort.model import build_system

HOUR = 3600.0


@pytest.fixture(scope="session")
def sys3():
    """10 km, 2600 kg/m^3, 3 h body used for the on-orbit cases."""
    return build_system(1e4, 2600.0, 3 * HOUR)


@pytest.fixture(scope="session")
def sys4():
    return build_system(1e4, 2600.0, 4 * HOUR)


@pytest.fixture(scope="session")
def small5():
    """100 m, 5 h body used for the Monte Carlo runs."""
    return build_system(100.0, 2600.0, 5 * HOUR)


@pytest.fixture(scope="session")
def still():
    return build_system(1e4, 2600.0, math.inf)
