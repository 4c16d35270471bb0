import math

import numpy as np
import pytest

import ringflow as rf
from ringflow.equilibrium import (SeriesDomainError, SolverError,
                                  minimize_virtual_potential,
                                  series_coefficients, solve_via_series,
                                  _residual)

from conftest import make_desk, make_friendly


def test_zero_force_gives_exact_uniform():
    p = rf.SystemParams(N=16, alpha=1.0, M=1.0, g=0.0, A=1.0, V=1.0, A0=-1.0)
    eq = rf.solve(p, rf.zero_profile())
    assert eq.w == 0.0
    np.testing.assert_array_equal(eq.deltas, 0.0)
    np.testing.assert_allclose(eq.gaps, 1.0 / 16, rtol=1e-15)
    rep = rf.verify(eq, p, rf.zero_profile())
    assert rep.residual_max == 0.0
    assert rep.delta_max == 0.0


def test_effective_force_scale_and_linearity():
    f = rf.bump_profile(L0=0.1, center=0.5)
    assert rf.compute_w(rf.zero_profile(), 1.0, 1.0) == 0.0
    w = rf.compute_w(f, 1e-6, 1.0)
    assert 0 < w <= 1e-6 * 0.1 / 1.0
    assert rf.compute_w(f, 2e-6, 1.0) == pytest.approx(2 * w, rel=1e-12)


def test_desk_solution_meets_tolerances(desk64):
    p, f, w, eq = desk64
    rep = rf.verify(eq, p, f)
    assert rep.residual_rel <= 1e-10
    assert rep.delta_max <= rep.delta_max_bound
    assert rep.delta_step_max <= rep.delta_step_bound
    assert rep.gap_variation_sum <= rep.gap_variation_bound
    assert np.all(np.diff(eq.x0) > 0)
    assert abs(np.sum(eq.gaps) - p.L) <= 1e-12 * p.L
    assert eq.x0[0] == 0.0


def test_desk_solution_matches_minimizer(desk64):
    p, f, w, eq = desk64
    oracle = minimize_virtual_potential(p, f)
    assert np.max(np.abs(oracle.x0 - eq.x0)) <= 1e-8 * p.mean_gap


def test_friendly_solution_matches_minimizer(friendly32):
    p, f, w, eq = friendly32
    oracle = minimize_virtual_potential(p, f)
    assert np.max(np.abs(oracle.x0 - eq.x0)) <= 1e-8 * p.mean_gap
    rep = rf.verify(eq, p, f)
    assert rep.bounds_ok
    assert rep.delta_max > 1e-6  # non-vacuous instance


def test_residual_not_worse_than_uniform(friendly32):
    p, f, w, eq = friendly32
    uniform = np.zeros(p.N)
    r_uniform = np.max(np.abs(_residual(uniform, p, f, w)[1:]))
    r_solved = np.max(np.abs(eq.residual[1:]))
    assert r_solved <= r_uniform


def test_gaps_grow_clockwise_on_drive_free_arc(friendly32):
    p, f, w, eq = friendly32
    from ringflow.forcefield import force_eval
    lo, hi = f.support()
    # interior of the drive-free arc: gap balance forces strict growth
    free = [k for k in range(2, p.N)
            if force_eval(f, eq.x0[k]) == 0.0 and force_eval(f, eq.x0[k - 1]) == 0.0]
    assert len(free) > 5
    for k in free:
        assert eq.deltas[k] > eq.deltas[k - 1]


def test_series_coefficients_exact():
    a = series_coefficients(50)
    assert a[1] == pytest.approx(-0.5, rel=1e-15)
    assert a[2] == pytest.approx(3.0 / 8.0, rel=1e-15)
    assert a[3] == pytest.approx(-5.0 / 16.0, rel=1e-15)
    for m in range(1, 51):
        exact = math.factorial(2 * m) / (2**m * math.factorial(m)) ** 2
        assert a[m] == pytest.approx((-1) ** m * exact, rel=1e-13)
        assert abs(a[m]) <= 1.0
        if m > 1:
            assert np.sign(a[m]) == -np.sign(a[m - 1])
    assert abs(a[50]) * math.sqrt(math.pi * 50) == pytest.approx(1.0, rel=0.05)


def test_series_matches_gap_deltas(desk64, friendly32):
    for p, f, w, eq in (desk64, friendly32):
        closed, series, Q = solve_via_series(p, f, eq.x0,
                                             delta_ref=eq.delta_ref, w=eq.w)
        assert np.max(np.abs(closed - eq.deltas)) <= 1e-9
        assert np.max(np.abs(series - eq.deltas)) <= 1e-9


def test_series_zero_force():
    p = rf.SystemParams(N=8, alpha=1.0, M=1.0, g=0.0, A=1.0, V=1.0)
    x0 = np.arange(8) / 8.0
    closed, series, Q = solve_via_series(p, rf.zero_profile(), x0, w=0.0)
    np.testing.assert_array_equal(Q, 0.0)
    np.testing.assert_array_equal(closed, 0.0)
    np.testing.assert_array_equal(series, 0.0)


def test_series_domain_violation_raises():
    p = rf.SystemParams(N=16, alpha=1e-6, M=1.0, g=1.0, A=1.0, V=1.0)
    f = rf.bump_profile(L0=0.5, center=0.3)
    x0 = np.arange(16) / 16.0
    with pytest.raises(SeriesDomainError):
        solve_via_series(p, f, x0, w=rf.compute_w(f, p.g, p.L))


def test_non_perturbative_coupling_rejected():
    p = rf.SystemParams(N=16, alpha=1e-9, M=1.0, g=1.0, A=1.0, V=1.0)
    with pytest.raises(SolverError):
        rf.solve(p, rf.bump_profile(L0=0.5, center=0.3))


def test_virtual_potential_properties(friendly32):
    p, f, w, eq = friendly32
    assert rf.virtual_potential(f, p.g, w, 0.0) == 0.0
    assert abs(rf.virtual_potential(f, p.g, w, p.L)) <= 1e-12 * max(abs(w), p.g)
    xs = np.random.default_rng(5).uniform(0.01, 0.99, 100)
    h = 1e-6
    Wp = (rf.virtual_potential(f, p.g, w, xs + h)
          - rf.virtual_potential(f, p.g, w, xs - h)) / (2 * h)
    from ringflow.forcefield import force_eval
    want = -(p.g * force_eval(f, xs) - w)
    np.testing.assert_allclose(Wp, want, rtol=1e-6, atol=1e-9 * max(p.g, abs(w)))


def test_virtual_potential_zero_profile():
    assert rf.virtual_potential(rf.zero_profile(), 1.0, 0.0, 0.7) == 0.0


def test_virtual_potential_rejects_mismatched_w(friendly32):
    p, f, w, eq = friendly32
    with pytest.raises(ValueError, match="multivalued"):
        rf.virtual_potential(f, p.g, w * 1.5, 0.3)


def test_uniformity_improves_with_N():
    # desk family: the deviation scale shrinks like N^-6.5 and falls below
    # double resolution of the gaps by N = 256, so monotone non-strictly
    vals = []
    for N in (64, 256, 1024):
        p, f, w = make_desk(N)
        eq = rf.solve(p, f)
        vals.append(rf.verify(eq, p, f).gap_uniformity)
    assert vals[0] >= vals[1] >= vals[2]
    assert vals[0] > 0
    assert vals[2] <= 1e-15


def test_friendly_uniformity_improves_with_N():
    # same trend at visible deviation scales
    vals = []
    for N in (32, 64, 128):
        p, f, w = make_friendly(N)
        eq = rf.solve(p, f)
        vals.append(rf.verify(eq, p, f).gap_uniformity)
    assert vals[0] > vals[1] > vals[2]
