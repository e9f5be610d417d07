import numpy as np
import pytest

from logobs import testcases
from logobs.solver import solve_nested

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def log_oracle():
    return testcases.log_oracle()


@pytest.fixture(scope="session")
def planar():
    """Planar 2D log solution on the 513^2 grid; free boundary {x1 = 0}."""
    u, report = solve_nested(testcases.planar_2d(), levels=4)
    return u, report


@pytest.fixture(scope="session")
def planar_field(planar):
    return planar[0]


@pytest.fixture(scope="session")
def planar_scan(planar_field):
    from logobs.weiss import wbar_scan

    return wbar_scan(planar_field, np.zeros(2), np.geomspace(0.3, 0.05, 15))


@pytest.fixture(scope="session")
def planar_analysis(planar_field):
    from logobs.blowup import analyze_point

    return analyze_point(planar_field, np.zeros(2))
