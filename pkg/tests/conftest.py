import pytest

from tclflex.fleet_sim import HeterogeneitySpec, Uniform, build_fleet
from tclflex.tcl_model import REFERENCE_AC

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def reference_ac():
    return REFERENCE_AC


@pytest.fixture(scope="session")
def hetero_spec():
    return HeterogeneitySpec(
        C=Uniform(1.5, 2.5),
        R=Uniform(1.8, 2.2),
        P_m=Uniform(5.0, 6.5),
        eta=Uniform(2.3, 2.7),
        theta_r=Uniform(21.5, 23.5),
        delta=Uniform(0.25, 0.375),
    )


@pytest.fixture(scope="session")
def hetero_fleet(hetero_spec):
    return build_fleet(200, hetero_spec, seed=5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
