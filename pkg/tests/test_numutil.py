"""The stable kernels against high-precision references (mpmath oracle)."""

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from ringflow import numutil

mp.mp.dps = 50
RNG = np.random.default_rng(101)


def mp_ref(expr, *args):
    return float(expr(*[mp.mpf(a) for a in args]))


@pytest.mark.parametrize("scale", [1e-14, 1e-8, 1e-3, 0.3])
def test_inv_sq_diff_matches_high_precision(scale):
    for _ in range(50):
        a, b = RNG.uniform(-scale, scale, size=2)
        got = numutil.inv_sq_diff(a, b)
        want = mp_ref(lambda x, y: (1 + x) ** -2 - (1 + y) ** -2, a, b)
        tol = 1e-15 * max(abs(want), 1e-300)
        assert abs(got - want) <= max(tol, 1e-18 * scale)


@pytest.mark.parametrize("func,ref", [
    (numutil.inv_sq_rem, lambda u: (1 + u) ** -2 - 1 + 2 * u),
    (numutil.inv_sq_m1, lambda u: (1 + u) ** -2 - 1),
    (numutil.inv_cube_m1, lambda u: (1 + u) ** -3 - 1),
    (numutil.inv_sqrt_m1, lambda u: (1 + u) ** -mp.mpf("0.5") - 1),
])
@pytest.mark.parametrize("scale", [1e-13, 1e-6, 0.4])
def test_small_perturbation_kernels(func, ref, scale):
    for _ in range(50):
        u = RNG.uniform(-scale, scale)
        want = mp_ref(ref, u)
        got = float(func(u))
        assert abs(got - want) <= 1e-14 * max(abs(want), 1e-300) + 1e-320


@pytest.mark.parametrize("z", [0.0, 1e-8, 0.49, 0.51, 3.0, -4.0,
                               1e-8j, 0.4j, -2.0 + 3.0j, -40.0 + 200.0j])
def test_phi_functions(z):
    for k, func in ((1, numutil.phi1), (2, numutil.phi2), (3, numutil.phi3)):
        got = complex(func(np.array([z]))[0])
        zz = mp.mpc(z)
        if abs(z) == 0:
            want = complex(1.0 / mp.factorial(k))
        else:
            e = mp.e**zz
            poly = sum(zz**j / mp.factorial(j) for j in range(k))
            want = complex((e - poly) / zz**k)
        assert abs(got - want) <= 1e-14 * max(abs(want), 1.0)


def test_phi_branch_consistency_near_threshold():
    # just inside the series branch the closed formula must agree
    closed = {
        numutil.phi1: lambda z: (np.exp(z) - 1) / z,
        numutil.phi2: lambda z: (np.exp(z) - 1 - z) / z**2,
        numutil.phi3: lambda z: (np.exp(z) - 1 - z - z**2 / 2) / z**3,
        numutil.second_moment:
            lambda z: (np.exp(z) * (z**2 - 2 * z + 2) - 2) / z**3,
    }
    for angle in (0.0, 0.7, 2.0):
        z = 0.499 * np.exp(1j * angle)
        for func, ref in closed.items():
            a = func(np.array([z]))[0]
            assert abs(a - ref(z)) < 1e-13 * max(1.0, abs(a))


@pytest.mark.parametrize("z", [-3.0, -0.2, 0.0, -1.0 + 50.0j, -8.0 - 120.0j])
def test_pl_weights_exact_for_linear_forcing(z):
    # int_0^h e^{z(h-s)} (a + b s) ds must be reproduced exactly
    h = 0.37
    a, b = 1.3, -0.8
    E, wa, wb = (v[0] for v in numutil.pl_weights(np.array([z]), h))

    def integrand_re(s):
        return (np.exp(z * (h - s)) * (a + b * s)).real

    def integrand_im(s):
        return (np.exp(z * (h - s)) * (a + b * s)).imag

    want = quad(integrand_re, 0, h, limit=400)[0] \
        + 1j * quad(integrand_im, 0, h, limit=400)[0]
    got = wa * a + wb * (a + b * h)
    assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


@pytest.mark.parametrize("z", [-100.0 + 4e4j, -1e3 + 1e6j, -0.5])
def test_pl_weights_step_splitting_consistency(z):
    # one step of size h equals two composed steps of h/2 for any linear
    # forcing; exercises the weights in the stiff-oscillatory regime where
    # quadrature oracles give out
    h = 0.1
    a, b = 0.9, -1.7
    E, wa, wb = (v[0] for v in numutil.pl_weights(np.array([z]), h))
    Eh, wah, wbh = (v[0] for v in numutil.pl_weights(np.array([z]), h / 2))
    f0, f1, f2 = a, a + b * h / 2, a + b * h
    one = wa * f0 + wb * f2
    two = Eh * (wah * f0 + wbh * f1) + (wah * f1 + wbh * f2)
    assert abs(Eh * Eh - E) <= 1e-13 * abs(E)
    assert abs(one - two) <= 1e-12 * max(abs(one), abs(wa * a), 1e-300)


@pytest.mark.parametrize("z", [-3.0, 0.0, -1.0 + 50.0j])
def test_ramp_weights_exact_for_linear_forcing(z):
    # kernel (h - s) e^{z(h-s)} with linear forcing
    h = 0.21
    a, b = 0.4, 2.0
    ra, rb = (v[0] for v in numutil.pl_weights_ramp(np.array([z]), h))

    def integrand(s, part):
        val = (h - s) * np.exp(z * (h - s)) * (a + b * s)
        return val.real if part == 0 else val.imag

    want = quad(integrand, 0, h, args=(0,), limit=400)[0] \
        + 1j * quad(integrand, 0, h, args=(1,), limit=400)[0]
    got = ra * a + rb * (a + b * h)
    assert abs(got - want) <= 1e-10 * max(1.0, abs(want))
