import numpy as np
import pytest

from facepipe.controls import registry_default
from facepipe.render import FaceGeometry


@pytest.fixture(scope="session")
def registry():
    return registry_default()


@pytest.fixture(scope="session")
def geometry(registry):
    return FaceGeometry.default(registry)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
