import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from memres.signals import SignalConfig, TimeGrid, Trajectory, generate_input

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def long_input():
    """The standard drive: [0, 5000] at dt = 0.05, seed 0."""
    return generate_input(SignalConfig(TimeGrid.span(5000.0, 0.05), seed=0))


@pytest.fixture(scope="session")
def short_input():
    return generate_input(SignalConfig(TimeGrid.span(400.0, 0.05), seed=7))


def constant(grid, c):
    return Trajectory(grid, np.full(grid.n_steps, float(c)))


# acceptance outcomes, printed together at the end of the session
ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
