import numpy as np
import pytest

from petzqft import models

# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])


@pytest.fixture(scope="session")
def jc_cfg():
    return models.JcConfig()


@pytest.fixture(scope="session")
def thermal_channel(jc_cfg):
    return models.jc_channel(jc_cfg, "thermal")


@pytest.fixture(scope="session")
def coherent_channel(jc_cfg):
    return models.jc_channel(jc_cfg, "coherent_gibbs")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
