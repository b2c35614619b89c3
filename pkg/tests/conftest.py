import numpy as np
import pytest

from latpart import LatticeField


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_field(rng, d, n, scale=1.0):
    return LatticeField(scale * rng.standard_normal((n,) * d))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
