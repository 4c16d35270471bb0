"""Cancellation-free scalar kernels and exponential-integrator coefficients.

The chain is stiff: interparticle forces are up to 16 orders of magnitude
larger than the drive, so every quantity of physical interest is a small
relative perturbation.  Naive evaluation of expressions like
(1+a)^-2 - (1+b)^-2 with a, b ~ 1e-12 would drown the signal in roundoff.
The helpers here evaluate those differences in exact factored form.
"""

from __future__ import annotations

import numpy as np

# number of Taylor terms for the small-argument phi branches; 22 terms at
# |z| < 0.5 leave a remainder below 0.5^22/23! ~ 1e-29
_PHI_TERMS = 22
_PHI_SMALL = 0.5


def inv_sq_diff(a, b):
    """(1+a)^-2 - (1+b)^-2, exact factored form (no cancellation)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (b - a) * (2.0 + a + b) / (((1.0 + a) * (1.0 + b)) ** 2)


def inv_sq_rem(u):
    """(1+u)^-2 - 1 + 2u  ==  u^2 (3 + 2u) / (1+u)^2."""
    u = np.asarray(u, dtype=float)
    return u * u * (3.0 + 2.0 * u) / (1.0 + u) ** 2


def inv_sq_m1(u):
    """(1+u)^-2 - 1  ==  -u (2 + u) / (1+u)^2."""
    u = np.asarray(u, dtype=float)
    return -u * (2.0 + u) / (1.0 + u) ** 2


def inv_cube_m1(d):
    """(1+d)^-3 - 1  ==  -d (3 + 3d + d^2) / (1+d)^3."""
    d = np.asarray(d, dtype=float)
    return -d * (3.0 + d * (3.0 + d)) / (1.0 + d) ** 3


def inv_sqrt_m1(q):
    """(1+q)^-1/2 - 1  ==  -q / (sqrt(1+q) (1 + sqrt(1+q)))."""
    q = np.asarray(q, dtype=float)
    s = np.sqrt(1.0 + q)
    return -q / (s * (1.0 + s))


def _phi_series(z, k0):
    # sum_{j>=0} z^j / (j + k0)!
    z = np.asarray(z)
    import math

    term = np.full(z.shape, 1.0 / math.factorial(k0), dtype=complex)
    out = term.copy()
    for j in range(1, _PHI_TERMS):
        term = term * z / (j + k0)
        out = out + term
    return out


def phi1(z):
    """phi_1(z) = (e^z - 1)/z, stable for small |z| (vectorized, complex)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _PHI_SMALL
    out[small] = _phi_series(z[small], 1)
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0) / zb
    return out


def phi2(z):
    """phi_2(z) = (e^z - 1 - z)/z^2."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _PHI_SMALL
    out[small] = _phi_series(z[small], 2)
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0 - zb) / zb**2
    return out


def phi3(z):
    """phi_3(z) = (e^z - 1 - z - z^2/2)/z^3."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _PHI_SMALL
    out[small] = _phi_series(z[small], 3)
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0 - zb - 0.5 * zb**2) / zb**3
    return out


def second_moment(z):
    """int_0^1 x^2 e^{z x} dx = (e^z (z^2 - 2z + 2) - 2)/z^3, stable."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _PHI_SMALL
    zs = z[small]
    # sum_j z^j / (j! (j+3))
    term = np.full(zs.shape, 1.0 / 3.0, dtype=complex)
    acc = term.copy()
    fact = 1.0
    for j in range(1, _PHI_TERMS):
        fact *= j
        term = zs**j / (fact * (j + 3))
        acc = acc + term
    out[small] = acc
    zb = z[~small]
    out[~small] = (np.exp(zb) * (zb**2 - 2.0 * zb + 2.0) - 2.0) / zb**3
    return out


def pl_weights(z, h):
    """Duhamel weights for kernel e^{z tau} with piecewise-linear forcing.

    Over one step the running integral I(t) = int_0^t e^{z(t-s)} f(s) ds
    obeys I(t+h) = e^{zh} I(t) + wa*f(t) + wb*f(t+h); returns (e^{zh}, wa, wb).
    """
    zh = np.asarray(z, dtype=complex) * h
    p1 = phi1(zh)
    p2 = phi2(zh)
    return np.exp(zh), h * (p1 - p2), h * p2


def pl_weights_ramp(z, h):
    """Weights for the confluent kernel tau e^{z tau} (double-root case).

    J(t) = int_0^t (t-s) e^{z(t-s)} f(s) ds satisfies
    J(t+h) = e^{zh} (J(t) + h I(t)) + wa*f(t) + wb*f(t+h)
    with I the plain kernel integral; returns (wa, wb).
    """
    zh = np.asarray(z, dtype=complex) * h
    psi = phi1(zh) - phi2(zh)
    m2 = second_moment(zh)
    return h * h * m2, h * h * (psi - m2)
