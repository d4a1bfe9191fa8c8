import math

import pytest

from coneshrink import compute_coefficients, make_family
from coneshrink.ivp import SolverConfig, continue_phi, integrate_gamma, to_d_profile

# reference families used throughout
FAM1 = dict(g=1, m_minus=1, m_plus=1, n=2, theta1=math.pi / 4)
FAM2 = dict(g=2, m_minus=1, m_plus=1, n=3, theta1=math.pi / 6)


@pytest.fixture(scope="session")
def fam1():
    return make_family(**FAM1)


@pytest.fixture(scope="session")
def fam2():
    return make_family(**FAM2)


@pytest.fixture(scope="session")
def series1(fam1):
    return compute_coefficients(fam1, 36)


@pytest.fixture(scope="session")
def series2(fam2):
    return compute_coefficients(fam2, 36)


@pytest.fixture(scope="session")
def solved1(fam1, series1):
    """Direct tol=1e-10 solve of the reference g=1 family."""
    return integrate_gamma(fam1, series1, SolverConfig(tol=1e-10))


@pytest.fixture(scope="session")
def dside1(fam1, solved1):
    return to_d_profile(solved1, fam1)


@pytest.fixture(scope="session")
def continued1(fam1, dside1):
    return continue_phi(dside1, fam1, config=SolverConfig(tol=1e-10))
