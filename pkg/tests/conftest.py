import sys

import numpy as np
import pytest

from cosserat_pcs.rod import XI0, Medium, RodSpec


def random_pose(rng):
    from cosserat_pcs.se3 import exp_se3

    return exp_se3(rng.normal(size=6) * [1, 1, 1, 0.3, 0.3, 0.3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def rod_air():
    return RodSpec.uniform()


@pytest.fixture(scope="session")
def rod_water():
    return RodSpec.uniform(medium=Medium.water())


@pytest.fixture(scope="session")
def small_rod():
    """Two coarse sections: cheap enough for finite-difference oracles."""
    return RodSpec.uniform(n_sections=2, microsolids=9, medium=Medium.water())


def rest(n):
    return np.tile(XI0, n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
