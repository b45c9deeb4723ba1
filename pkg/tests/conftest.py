import pytest

from lrbms.presets import checkerboard_problem, manufactured_problem
from lrbms.swipdg import assemble

#: one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def manufactured():
    return manufactured_problem(2, 4)


@pytest.fixture(scope="session")
def manufactured_op(manufactured):
    return assemble(manufactured)


@pytest.fixture(scope="session")
def checkerboard():
    """Three components with coefficients (1, mu0, mu1), contrast 100."""
    return checkerboard_problem(2, 4)


@pytest.fixture(scope="session")
def checkerboard_op(checkerboard):
    return assemble(checkerboard)
