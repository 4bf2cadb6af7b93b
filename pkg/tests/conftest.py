import numpy as np
import pytest
from hypothesis import settings


from centercut.manifold import SPD, Euclidean, KleinHyperbolic

_ACCEPTANCE = []

# fixed example sequence so test runs are repeatable
settings.register_profile("repeatable", derandomize=True, deadline=None)
settings.load_profile("repeatable")


@pytest.fixture(params=["euclidean", "klein", "spd"])
def manifold(request):
    return {"euclidean": Euclidean(3), "klein": KleinHyperbolic(3), "spd": SPD(3)}[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Record one acceptance-criterion line; printed in the terminal summary."""

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
