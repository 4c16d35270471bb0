import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ringflow as rf
from ringflow import spectral
from ringflow.spectral import (dft, idft, mode_solution, roots, solve_modes,
                               weights_vector, weight_sum_constant,
                               zero_mode_envelope)

from conftest import make_desk

RNG = np.random.default_rng(12)


def test_constant_signal_lands_on_mode_zero():
    h = np.full(16, 2.5)
    m = dft(h)
    assert m[0] == pytest.approx(2.5, rel=1e-14)
    assert np.max(np.abs(m[1:])) < 1e-14


def test_cosine_splits_between_conjugate_modes():
    N, n0 = 32, 5
    k = np.arange(N)
    m = dft(np.cos(2 * np.pi * n0 * k / N))
    assert m[n0] == pytest.approx(0.5, abs=1e-13)
    assert m[N - n0] == pytest.approx(0.5, abs=1e-13)
    others = np.delete(np.abs(m), [n0, N - n0])
    assert np.max(others) < 1e-13


def test_roundtrip_and_parseval():
    for N in (17, 64):  # prime length exercises the generic transform
        h = RNG.normal(size=N)
        back = idft(dft(h)).real
        np.testing.assert_allclose(back, h, rtol=1e-13, atol=1e-13)
        lhs = np.sum(np.abs(h) ** 2) / N
        rhs = np.sum(np.abs(dft(h)) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_difference_symbol():
    N = 48
    y = RNG.normal(size=N)
    lhs = dft(np.roll(y, -1) - y)
    sym = np.exp(-2j * np.pi * np.arange(N) / N) - 1.0
    np.testing.assert_allclose(lhs, dft(y) * sym, rtol=0, atol=1e-14)


def test_zero_mode_roots_and_coefficients(desk64):
    p, f, w, eq = desk64
    rt = roots(p)
    e = rt.entry(0)
    assert e["z1"] == pytest.approx(-p.A / p.M, rel=1e-14)
    assert e["z2"] == 0.0
    # response coefficients come from the separation of the two roots:
    # r_l = 1/(M (z_l - z_other)), so |r(0)| = 1/A
    assert abs(e["r1"]) == pytest.approx(1.0 / p.A, rel=1e-13)
    assert abs(e["r2"]) == pytest.approx(1.0 / p.A, rel=1e-13)


@given(st.floats(-8, 2), st.floats(-8, 4), st.floats(-4, 4),
       st.sampled_from([8, 16, 33]))
@settings(max_examples=50, deadline=None)
def test_root_identities_random_parameters(lm, la, lA, N):
    p = rf.SystemParams(N=N, M=10.0**lm, alpha=10.0**la, A=10.0**lA, g=0.0,
                        V=1.0, A0=0.0)
    rt = roots(p)
    np.testing.assert_allclose(rt.z1 + rt.z2, -p.A / p.M, rtol=1e-12)
    np.testing.assert_allclose(rt.z1 * rt.z2, rt.stiffness,
                               rtol=1e-12, atol=1e-300)
    good = ~rt.degenerate
    sep = p.M * (rt.z1 - rt.z2)
    np.testing.assert_allclose(rt.r1[good], 1.0 / sep[good], rtol=1e-12)
    np.testing.assert_allclose(rt.r2[good], -1.0 / sep[good], rtol=1e-12)


def test_oscillatory_regime_root_structure(desk64):
    p, f, w, eq = desk64
    rt = roots(p)
    assert rt.oscillatory_all_nonzero
    np.testing.assert_allclose(rt.z1[1:].real, -p.A / (2 * p.M), rtol=1e-14)
    np.testing.assert_allclose(rt.z2[1:], np.conj(rt.z1[1:]), rtol=1e-14)


def test_mode_solution_zero_forcing(desk64):
    p, f, w, eq = desk64
    t = np.linspace(0, 1e-3, 65)
    eta = mode_solution(p, 3, np.zeros(65), t)
    assert np.all(eta == 0)


def test_mode_solution_constant_forcing_steady_state(desk64):
    p, f, w, eq = desk64
    n = 5
    rt = roots(p)
    G = 1e-7
    T = 50 * 2 * p.M / p.A
    t = np.linspace(0, T, 4097)
    eta = mode_solution(p, n, np.full(t.shape, G), t)
    want = G / (p.M * rt.z1[n] * rt.z2[n])
    assert eta[-1] == pytest.approx(want, rel=1e-8)
    delta = p.mean_gap
    alt = G * delta**3 / (4 * p.alpha * (1 - np.cos(2 * np.pi * n / p.N)))
    assert abs(want - alt) <= 1e-12 * abs(alt)


def test_zero_mode_step_forcing_grows_linearly(desk64):
    # z2(0) = 0 turns a step drive into secular growth:
    # eta(0, t) = (G/A) [t - (M/A)(1 - e^{-At/M})]
    p, f, w, eq = desk64
    G = 1e-9
    T = 30 * 2 * p.M / p.A
    t = np.linspace(0, T, 8193)
    eta = mode_solution(p, 0, np.full(t.shape, G), t)
    want = (G / p.A) * (t - (p.M / p.A) * (1 - np.exp(-p.A * t / p.M)))
    np.testing.assert_allclose(eta.real, want, rtol=1e-10, atol=1e-30)
    np.testing.assert_allclose(eta.imag, 0.0, atol=1e-25)


def test_linear_solution_zero_drive():
    p = rf.SystemParams(N=16, alpha=1.0, M=1.0, g=0.0, A=1.0, V=1.0, A0=-1.0)
    eq = rf.solve(p, rf.zero_profile())
    t = np.linspace(0, 1.0, 129)
    field, y, u = spectral.linear_solution(p, eq, rf.zero_profile(), t)
    assert np.all(y == 0) and np.all(u == 0)


def test_reconstruction_is_real_and_second_difference_identity(desk64):
    p, f, w, eq = desk64
    T = 5 * 2 * p.M / p.A
    t = np.linspace(0, T, 2049)
    field, y, u = spectral.linear_solution(p, eq, f, t)
    resid = np.max(np.abs(idft(field.values, axis=0).imag))
    assert resid <= 1e-12 * max(1.0, np.max(np.abs(y)))
    # second difference of the particle field == transform with the squared
    # difference symbol
    sym = (np.exp(-2j * np.pi * np.arange(p.N) / p.N) - 1.0) ** 2
    lhs = np.roll(y, -1, axis=1) - 2 * y + np.roll(y, 1, axis=1)
    rhs = idft(field.values * sym[:, None], axis=0).real.T
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.max(np.abs(lhs))))


def test_mode_decoupling_through_particle_space(friendly32):
    # drive one mode pair; the particle-space integrator, which knows
    # nothing about modes, must respond only in that pair
    p, f, w, eq = friendly32
    from ringflow.dynamics import simulate_linear_cutoff

    n0 = 7
    k = np.arange(p.N)
    shape = np.cos(2 * np.pi * n0 * k / p.N)
    T = 2 * 2 * p.M / p.A
    omega = np.sqrt(roots(p).stiffness[n0])  # resonant, so the pair dominates

    def forcing(t):
        return 1e-3 * shape * np.sin(omega * t)

    traj = simulate_linear_cutoff(p, eq, f, T, 2560, samples=256,
                                  substeps=1, forcing=forcing)
    modes = dft(traj.y.T, axis=0)
    peak = np.max(np.abs(modes))
    mask = np.ones(p.N, bool)
    mask[[n0, p.N - n0]] = False
    leak = np.max(np.abs(modes[mask]))
    assert leak <= 1e-12 * peak


def test_weights_and_sum_constant():
    cs = []
    for N in (64, 256, 1024):
        p, f, w = make_desk(N)
        d = weights_vector(p)
        assert d[0] == pytest.approx(N, rel=1e-14)  # 1/delta with L = 1
        assert d[5] == pytest.approx(5 * np.sqrt(p.alpha / (p.M * p.mean_gap)),
                                     rel=1e-14)
        cs.append(weight_sum_constant(p))
    base = cs[0]
    for c in cs[1:]:
        assert abs(c - base) <= 0.2 * base


def test_root_continuity_and_confluent_kernel():
    # walk the stiffness through the double-root point at n = N/2 and watch
    # the root pair stay continuous while the solver switches kernels
    N, M, A = 8, 1.0, 1.0
    delta = 1.0 / N
    # discriminant at n = N/2: 1 - 32 M alpha/(A^2 delta^3) = 0
    alpha_crit = A**2 * delta**3 / (32.0 * M)

    def params(scale):
        return rf.SystemParams(N=N, M=M, A=A, alpha=scale * alpha_crit,
                               g=0.0, V=1.0, A0=-1.0)

    zs = []
    for s in (0.999999, 1.0, 1.000001):
        p = params(s)
        rt = roots(p)
        zs.append(rt.z1[p.N // 2])
        if s == 1.0:
            assert rt.degenerate[p.N // 2]
    assert abs(zs[0] - zs[2]) <= 1e-2 * abs(zs[1])

    # confluent response must be the limit of the two-root response
    p_deg = params(1.0)
    p_off = params(1.0 + 1e-7)
    t = np.linspace(0, 3.0, 513)
    forcing = np.sin(2 * np.pi * t / 3.0)
    n = p_deg.N // 2
    eta_deg = mode_solution(p_deg, n, forcing, t)
    eta_off = mode_solution(p_off, n, forcing, t)
    scale = np.max(np.abs(eta_deg))
    assert np.max(np.abs(eta_deg - eta_off)) <= 1e-5 * scale


def test_bound_suite_trivial_zero_drive():
    p = rf.SystemParams(N=16, alpha=1.0, M=1.0, g=0.0, A=1.0, V=1.0, A0=-1.0)
    z = rf.zero_profile()
    eq = rf.solve(p, z)
    t = np.linspace(0, 1.0, 65)
    field, y, u = spectral.linear_solution(p, eq, z, t)
    rep = spectral.bound_suite(p, eq, z, field)
    assert rep.all_passed
    for r in rep.rows:
        if r.kind == "explicit":
            assert r.lhs == 0.0


def test_envelope_on_desk_instance(desk64):
    p, f, w, eq = desk64
    T = 20 * 2 * p.M / p.A
    t = np.linspace(0, T, 8193)
    field, y, u = spectral.linear_solution(p, eq, f, t)
    env = zero_mode_envelope(field)
    assert 0.75 <= env["exponent"] <= 1.25
