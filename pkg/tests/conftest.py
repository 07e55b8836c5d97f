import math
from pathlib import Path

import pytest

from beameq.config import BeamConfig, load_config
from beameq.radial import solve_equilibrium, solve_equilibrium_conformal
from beameq.species import SpeciesParams

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# acceptance lines collected during the run and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pinch_config():
    return load_config(CONFIGS / "pinch.cfg")


@pytest.fixture(scope="session")
def bennett_config():
    return load_config(CONFIGS / "bennett.cfg")


@pytest.fixture(scope="session")
def tf_config():
    return load_config(CONFIGS / "thomas_fermi.cfg")


@pytest.fixture(scope="session")
def pinch_profile(pinch_config):
    return solve_equilibrium_conformal(pinch_config)


@pytest.fixture(scope="session")
def bennett_profile(bennett_config):
    return solve_equilibrium(bennett_config)


@pytest.fixture(scope="session")
def tf_profile(tf_config):
    return solve_equilibrium(tf_config)


def make_config(model="bennett", nu=(0.5, -0.5), q=(1.0, -1.0), n=(1.0, 1.0), t=(1.0, 1.0),
                m=(1.0, 1.0)):
    sp = SpeciesParams(q[0], m[0], t[0], nu[0], n[0])
    sm = SpeciesParams(q[1], m[1], t[1], nu[1], n[1])
    return BeamConfig(model, sp, sm)


@pytest.fixture
def config_factory():
    return make_config


CONFORMAL_N = 4.0 * math.sqrt(0.75)
