import numpy as np
import pytest

from heterowave.condensate import from_physical, preset
from heterowave.correlations import Correlator

# times at which the side-mode figures are drawn
WP_TIMES = (1.025, 4.025)
SP_TIMES = (0.03025, 0.12075)


@pytest.fixture(scope="session")
def wp_cfg():
    return from_physical(preset("wp"), 101)


@pytest.fixture(scope="session")
def sp_cfg():
    return from_physical(preset("sp"), 101)


@pytest.fixture(scope="session")
def wp_corr(wp_cfg):
    return Correlator(wp_cfg)


@pytest.fixture(scope="session")
def sp_corr(sp_cfg):
    return Correlator(sp_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} :: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
