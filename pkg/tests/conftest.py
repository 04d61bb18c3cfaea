import os

import pytest
from hypothesis import HealthCheck, settings

from rumkit import dualize, fixtures

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def penrose30():
    return dualize(fixtures.multigrid("penrose", window=30))


@pytest.fixture(scope="session")
def penrose40():
    return dualize(fixtures.multigrid("penrose", window=40))


@pytest.fixture(scope="session")
def rhombille_tiling():
    return dualize(fixtures.multigrid("rhombille", window=12))


@pytest.fixture(scope="session")
def square_tiling():
    return dualize(fixtures.multigrid("square", window=12))
