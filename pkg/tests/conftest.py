import numpy as np
import pytest
from hypothesis import settings

from tfpv_lab.netmodel import eliminate_conservation, parse_network
from tfpv_lab.scenario import DATA_DIR

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def network_text(name: str) -> str:
    return (DATA_DIR / "networks" / f"{name}.crn").read_text()


@pytest.fixture(scope="session")
def mm_field():
    net = parse_network(network_text("mm_irrev"))
    return eliminate_conservation(net, {"E + C": "e0", "P + S + C": "s0"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for n, m in sys.modules.items() if n.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
