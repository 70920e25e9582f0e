import math

import pytest

from expspider.portrait import BranchAddress, OrbitPortrait
from expspider.pullback import IterationOptions, run

PI_I = math.pi * 1j


@pytest.fixture(scope="session")
def pi_portrait():
    return OrbitPortrait(0, ("0", "1", "A"), "A")


@pytest.fixture(scope="session")
def pi_address():
    return BranchAddress({"1": 0, "A": -1})


@pytest.fixture(scope="session")
def degenerate_portrait():
    return OrbitPortrait(0, ("0", "1"), "1")


@pytest.fixture(scope="session")
def two_cycle_portrait():
    return OrbitPortrait(1, ("c", "1"), "c")


@pytest.fixture(scope="session")
def pi_run(pi_portrait, pi_address):
    return run(pi_portrait, pi_address, 0.8 * PI_I, IterationOptions(tol=1e-14))


@pytest.fixture(scope="session")
def two_cycle_run(two_cycle_portrait):
    return run(two_cycle_portrait, BranchAddress({"1": 0}), -3.0)
