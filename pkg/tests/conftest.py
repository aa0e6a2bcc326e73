import pytest

from contactwave.params import Grid, PhysParams


@pytest.fixture
def params():
    return PhysParams()


@pytest.fixture
def small_grid():
    return Grid(20.0, 401)


# one "[PASS]/[FAIL] criterion N: ..." line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
