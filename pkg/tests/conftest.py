import numpy as np
import pytest

from msk.model import bipartite, sk, two_species_pd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["sk", "bipartite", "pd2"])
def reference(request):
    return {"sk": sk, "bipartite": bipartite, "pd2": two_species_pd}[request.param]()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for r in sorted(RESULTS, key=lambda r: r.id):
            terminalreporter.write_line(r.line())
