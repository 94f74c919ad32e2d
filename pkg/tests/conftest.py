from __future__ import annotations

import pytest

from twolevel import dists
from twolevel.model import HeavyTrafficFamily

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def exp_family() -> HeavyTrafficFamily:
    """mu=1, c1=c2=1, b1=0.5, b2=1, ell1=1: beta1=0.5, beta2=1."""
    return HeavyTrafficFamily(mu=1.0, c1=1.0, c2=1.0, b1=0.5, b2=1.0, ell1=1.0)


@pytest.fixture
def erlang_family() -> HeavyTrafficFamily:
    e2 = dists.erlang(2, 2.0)
    return HeavyTrafficFamily(mu=1.0, c1=1.0, c2=1.0, b1=0.5, b2=1.0, ell1=1.0,
                              arrival_below=e2, arrival_above=e2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
