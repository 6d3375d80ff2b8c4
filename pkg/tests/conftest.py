import sys

import numpy as np
import pytest

from llab.mesh import triangulate_disk


@pytest.fixture(scope="session")
def unit_mesh():
    return triangulate_disk(1.0, 0.05)


@pytest.fixture(scope="session")
def coarse_mesh():
    return triangulate_disk(1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
