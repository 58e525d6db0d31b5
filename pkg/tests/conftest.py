import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from greentopo.model import table_ii

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture
def ref4():
    """Reference parameters at alpha = 4, eta = 0.8, ideal sleep mode."""
    return table_ii(alpha=4.0, eta=0.8)


@pytest.fixture
def ref5():
    return table_ii(alpha=5.0, eta=0.8)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items()
                if name.rsplit(".", 1)[-1] == "test_acceptance"), None)
    lines = getattr(mod, "REPORT", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
