import sys

import numpy as np
import pytest

from gps_lab import library
from gps_lab.cartan import ThetaSet, functional_from_spec
from gps_lab.flags import GpsSystem


def make_system(entry, theta=(1,), phi="alpha_1"):
    gens = library.load(entry) if isinstance(entry, str) else entry
    th = ThetaSet(gens.dimension, tuple(theta))
    return GpsSystem(gens, th, functional_from_spec(phi, th))


@pytest.fixture(scope="session")
def theta_sys():
    return make_system("theta-group")


@pytest.fixture(scope="session")
def cyclic_sys():
    return make_system("cyclic-diag(1)")


@pytest.fixture(scope="session")
def anosov_sys():
    return make_system("diag-anosov(1, 0.8)", (1, 2), "sum_omega")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion, after the run."""
    verdicts = {}
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            verdicts.update(getattr(mod, "VERDICTS", {}))
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
