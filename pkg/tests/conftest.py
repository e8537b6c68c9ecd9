import numpy as np
import pytest

from onebit_mimo import build_scenario, compute_moments, qam16, zadoff_chu_pilots


@pytest.fixture(scope="session")
def small():
    """M=4, tau=3, K=2, rho=1 with one-ring covariances."""
    sc = build_scenario(4, 2, 1.0)
    book = zadoff_chu_pilots(3, 2)
    return sc, book, compute_moments(sc, book)


@pytest.fixture(scope="session")
def medium():
    """M=8, tau=7, K=2, rho=1."""
    sc = build_scenario(8, 2, 1.0)
    book = zadoff_chu_pilots(7, 2)
    return sc, book, compute_moments(sc, book)


@pytest.fixture(scope="session")
def mrc_table(medium):
    from onebit_mimo import build_expectation_table

    return build_expectation_table(medium[2], qam16(), "MRC")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
