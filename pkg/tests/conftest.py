import numpy as np
import pytest

from zkblowup.ground_state import cached_ground_state
from zkblowup.spectral_core import Grid2D


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D.square(128, 16.0)


@pytest.fixture(scope="session")
def gs_small(small_grid):
    return cached_ground_state(small_grid)


@pytest.fixture(scope="session")
def mid_grid():
    return Grid2D.square(256, 24.0)


@pytest.fixture(scope="session")
def gs_mid(mid_grid):
    return cached_ground_state(mid_grid)


@pytest.fixture(scope="session")
def ps_mid(gs_mid):
    from zkblowup.profiles import build_profile_set
    return build_profile_set(gs_mid, K=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[num])
