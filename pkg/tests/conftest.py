import math

import pytest

from flatplan.flatmodel import flat_boundaries_from_joint

ACCEPTANCE_LINES = []


@pytest.fixture
def reference_bounds():
    return flat_boundaries_from_joint(0.0, 0.0, math.pi, 0.0, 0.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
