import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def seq_c2():
    from stableharnack.sequences import construct_sequences

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return construct_sequences(2.0, 12)


@pytest.fixture(scope="session")
def iso05():
    from stableharnack.spectral import StableModel

    return StableModel.isotropic(0.5)

# acceptance lines, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
