import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "herdlab",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("herdlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria report one verdict line each; collected here so the
# lines survive output capture and land at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(criterion, passed, text):
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
