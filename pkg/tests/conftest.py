import numpy as np
import pytest

from netcournot.instances import isolated_market, two_markets

# (criterion, passed, detail) rows collected by test_acceptance.py
ACCEPTANCE_LOG: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE_LOG, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def monopoly():
    return isolated_market()


@pytest.fixture
def congested():
    return two_markets(500.0)


@pytest.fixture
def uncongested():
    return two_markets(1000.0)
