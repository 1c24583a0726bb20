import warnings

import numpy as np
import pytest

from sobolev_escape.escape import EscapeConfig, global_escape
from sobolev_escape.flow import (EnergyShellSpec, ShellGeometry, classify_limit_sets, sample_energy_surface,
                                 weak_hyperbolicity_check)
from sobolev_escape.symbols import h_star

SQ2 = np.sqrt(2.0)
ZETA_PLUS = np.array([1 / SQ2, 0.0, -1 / SQ2, 0.0])
ZETA_MINUS = np.array([1 / SQ2, 0.0, 1 / SQ2, 0.0])
Z_STAR = np.array([2 * SQ2, 0.0, -2 * SQ2, 0.0])

# two further homogeneous degree-0 symbols with regular level 1/2 shells
OTHER_SYMBOLS = ["(x1^2 + x2*xi1)/(2*h0)", "(x1^2 + 0.3*x2^2)/(2*h0)"]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs for more than a few seconds")
    warnings.filterwarnings("ignore", message="The balance properties of Sobol")


@pytest.fixture(scope="session")
def hstar():
    return h_star()


@pytest.fixture(scope="session")
def geom(hstar):
    return ShellGeometry(hstar)


@pytest.fixture(scope="session")
def shell_spec(hstar):
    return EnergyShellSpec(hstar, 0.5)


@pytest.fixture(scope="session")
def shell_sample(shell_spec, geom):
    return sample_energy_surface(shell_spec, 2000, seed=0, geometry=geom)


@pytest.fixture(scope="session")
def report(geom, shell_spec):
    rep = classify_limit_sets(geom, shell_spec, n_orbits=200, tau_max=60.0, seed=0)
    weak_hyperbolicity_check(rep, geom, tube_radius=0.1)
    return rep


@pytest.fixture(scope="session")
def escape_fn(geom, report):
    return global_escape(geom, EscapeConfig(), report, seed=0)


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
        for line in RESULTS:
            terminalreporter.write_line(line)
