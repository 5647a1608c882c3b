import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    suite = getattr(config, "_santalo_acceptance", None)
    if suite is None:
        return
    terminalreporter.section("acceptance criteria")
    for line in suite.table().splitlines():
        terminalreporter.write_line(line)
