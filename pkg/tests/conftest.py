import numpy as np
import pytest

from instances import sqrt_market, two_type_two_good


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sqrt1():
    return sqrt_market()


@pytest.fixture
def two_type():
    return two_type_two_good()


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
