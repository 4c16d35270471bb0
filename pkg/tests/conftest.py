"""Shared instances.

desk*: transport-regime parameter sets from the exponent family, the ones
the bound checks target.  friendly: mildly coupled parameters where gap
deviations are large enough to stress the solvers and where explicit
integrators can resolve the fastest mode.
"""

import numpy as np
import pytest

import ringflow as rf

DESK_EXponents = (4.5, -2.0, 1.25, 0.0)
DESK = {"gamma1": 4.5, "gamma2": -2.0, "gamma3": 1.25, "gammaA": 0.0}


def make_desk(N: int):
    p = rf.from_exponents(N, DESK["gamma1"], DESK["gamma2"], DESK["gamma3"],
                          DESK["gammaA"], rho=0.01, V=1.0, beta=0.01)
    f = rf.bump_profile(L0=0.1, center=0.5, L=1.0)
    w = rf.compute_w(f, p.g, p.L)
    p = rf.calibrate_friction(p, w)
    return p, f, w


def make_friendly(N: int = 32):
    p = rf.SystemParams(N=N, L=1.0, M=1.0, alpha=1.0, g=0.05, A0=0.0,
                        A=1.0, V=0.3, rho=0.01, beta=0.01)
    f = rf.bump_profile(L0=0.3, center=0.5, L=1.0)
    w = rf.compute_w(f, p.g, p.L)
    p = rf.calibrate_friction(p, w)
    return p, f, w


@pytest.fixture(scope="session")
def desk64():
    p, f, w = make_desk(64)
    eq = rf.solve(p, f)
    return p, f, w, eq


@pytest.fixture(scope="session")
def desk256():
    p, f, w = make_desk(256)
    eq = rf.solve(p, f)
    return p, f, w, eq


@pytest.fixture(scope="session")
def friendly32():
    p, f, w = make_friendly(32)
    eq = rf.solve(p, f)
    return p, f, w, eq
