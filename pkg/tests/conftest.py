import numpy as np
import pytest

from codelearn.problems import generate_ecoc, generate_one_vs_all, make_one_vs_all


@pytest.fixture(scope="session")
def ecoc3():
    return generate_ecoc(2, 3, 0.3, seed=0)


@pytest.fixture(scope="session")
def antipodal_caps():
    return make_one_vs_all(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]), np.array([0.5, 0.5]))


@pytest.fixture(scope="session")
def three_caps():
    return generate_one_vs_all(3, 3, 0.5, seed=0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
