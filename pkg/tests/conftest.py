import numpy as np
import pytest

from agf.suites import random_bipartite_graph, random_graph  # noqa: F401  (re-exported for test modules)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def filterbank():
    from agf.graphbio import design_filterbank

    return design_filterbank()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
