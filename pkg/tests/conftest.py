from __future__ import annotations

import sys

import pytest

from qvlab.distributions import make_distribution
from qvlab.payoff import make_bump_payoff


@pytest.fixture(scope="session")
def uniform():
    return make_distribution({"family": "uniform"})


@pytest.fixture(scope="session")
def tilt_half():
    """f(u) = (1 + u/2)/2 on [-1, 1]."""
    return make_distribution({"family": "linear_tilt", "gamma": 0.5})


@pytest.fixture(scope="session")
def tilt_positive():
    """Positive-mean tilt used for the cutoff regime."""
    return make_distribution({"family": "linear_tilt", "gamma": 0.8})


@pytest.fixture(scope="session")
def P05():
    return make_bump_payoff(0.5)


@pytest.fixture(scope="session")
def P03():
    return make_bump_payoff(0.3)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            ok, detail = results[k]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
