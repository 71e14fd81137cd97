import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fuchsian_orbits import build_congruence, build_hecke, build_sl2z  # noqa: E402


@pytest.fixture(scope="session")
def sl2z():
    return build_sl2z()


@pytest.fixture(scope="session")
def hecke5():
    return build_hecke(5)


@pytest.fixture(scope="session")
def gamma2():
    return build_congruence(2)


@pytest.fixture(scope="session")
def gamma3():
    return build_congruence(3)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
