import numpy as np
import pytest

from thermoscope.rational import RationalMap

ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def square():
    return RationalMap.polynomial([0, 0, 1], name="z^2")


@pytest.fixture(scope="session")
def basilica():
    return RationalMap.polynomial([-1, 0, 1], name="z^2-1")


@pytest.fixture(scope="session")
def chebyshev():
    return RationalMap.polynomial([-2, 0, 1], name="z^2-2")


@pytest.fixture(scope="session")
def lattes_like():
    return RationalMap([1, 0, 1], [-1, 0, 1], name="(z^2+1)/(z^2-1)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
