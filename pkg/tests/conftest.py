import numpy as np
import pytest

from price_of_uncertainty import dcopf, hopf, pce
from price_of_uncertainty import stochastics as st


@pytest.fixture(scope="session")
def beta_demand():
    return st.beta(4, 2, -1.5, -0.9)


@pytest.fixture(scope="session")
def c2():
    return dcopf.case_c2()


@pytest.fixture(scope="session")
def demand_pce(beta_demand):
    return pce.pce_of_demand(beta_demand)


@pytest.fixture(scope="session")
def c2_hopf_samples(c2):
    return hopf.run_hopf(c2, 100_000, seed=42)


def binomial_band(p, n, k=3.0):
    return k * np.sqrt(p * (1.0 - p) / n)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
