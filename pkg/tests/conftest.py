import os
import sys
from fractions import Fraction

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from evtlab import (affine_mod1, make_correlated_spec, make_uncorrelated_spec,
                    neglog, powerlaw)


@pytest.fixture(scope="session")
def doubling():
    return affine_mod1(2)


@pytest.fixture(scope="session")
def tripling():
    return affine_mod1(3)


@pytest.fixture(scope="session")
def three_point_spec(doubling):
    """Non-periodic base point with maxima at orbit offsets 0, 1, 3."""
    from mpmath import mp
    with mp.workprec(80):
        zeta = mp.sqrt(2) / 16
    return make_correlated_spec(
        doubling, zeta,
        [(0, neglog()), (1, powerlaw(Fraction(1, 2))), (3, powerlaw(Fraction(1, 2)))])


@pytest.fixture(scope="session")
def periodic_spec(doubling):
    """Prime-period-5 base point with maxima at offsets 0, 1, 3."""
    return make_correlated_spec(
        doubling, Fraction(1, 31),
        [(0, neglog()), (1, powerlaw(Fraction(1, 2))), (3, powerlaw(Fraction(1, 2)))],
        periodic=5)


@pytest.fixture(scope="session")
def single_periodic_spec(doubling):
    return make_correlated_spec(doubling, Fraction(1, 31), [(0, neglog())],
                                periodic=5)


@pytest.fixture(scope="session")
def mixed_uncorrelated_spec(doubling):
    """Fixed point of the doubling map plus a typical point, equal weights."""
    from mpmath import mp
    with mp.workprec(80):
        typ = mp.sqrt(2) / 16
    return make_uncorrelated_spec(
        doubling, [(Fraction(0), neglog(), 1), (typ, neglog(), 0)])
