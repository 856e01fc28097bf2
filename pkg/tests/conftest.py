import numpy as np
import pytest

from covertree.graph import complete_graph, localized_example, wheel_graph
from covertree.green import band_scan


@pytest.fixture(scope="session")
def k4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def k4_random():
    """K4 with a fixed non-constant potential."""
    return complete_graph(4, [0.3, -0.7, 0.1, 0.55])


@pytest.fixture(scope="session")
def wheel_random():
    rng = np.random.default_rng(11)
    return wheel_graph(4, rng.uniform(-1, 1, 5))


@pytest.fixture(scope="session")
def k4_bands(k4):
    return band_scan(k4, grid_step=0.02)


@pytest.fixture(scope="session")
def k4_random_bands(k4_random):
    return band_scan(k4_random, grid_step=0.02)


@pytest.fixture(scope="session")
def localized2():
    return localized_example(2)


@pytest.fixture(scope="session")
def localized2_bands(localized2):
    return band_scan(localized2, grid_step=0.02)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion; printed at the end of the run."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
