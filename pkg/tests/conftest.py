import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stocknet.mi import BinningSpec, build_bias_calibration

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def calib_500():
    """Small-replicate calibration for T=500 panels used across tests."""
    return build_bias_calibration(BinningSpec(4, 500), replicates=200, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
