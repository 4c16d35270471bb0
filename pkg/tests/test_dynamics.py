import numpy as np
import pytest

import ringflow as rf
from ringflow import dynamics
from ringflow.dynamics import (GapCollapseError, Trajectory, consistency_identity,
                               energy_balance, l3_series, residual_terms,
                               simulate_full, simulate_linear_cutoff)
from ringflow.params import derived_scales

from conftest import make_friendly

RNG = np.random.default_rng(21)


def _uniform_zero_drive(N=16):
    p = rf.SystemParams(N=N, alpha=1.0, M=1.0, g=0.0, A=1.0, V=1.0, A0=-1.0)
    f = rf.zero_profile()
    eq = rf.solve(p, f)
    return p, f, eq


def test_rigid_rotation_is_exact():
    p, f, eq = _uniform_zero_drive()
    traj = simulate_full(p, eq, f, T=1.0 / p.V, steps=512, samples=128)
    assert np.max(np.abs(traj.y)) == 0.0
    assert np.max(np.abs(traj.u)) == 0.0
    # positions advance as a rigid rotation over the full revolution
    np.testing.assert_allclose(traj.positions[-1], eq.x0 + 1.0, rtol=1e-12)
    assert not traj.meta["window_exited"]


def test_velocity_relaxation_closed_form():
    # uniform velocity offset relaxes at the friction rate, independent of
    # the (weak) repulsion: v(t) - V = u0 exp(-A t / M)
    p = rf.SystemParams(N=4, alpha=1e-12, M=0.7, g=0.0, A=1.3, V=1.0,
                        A0=-1.3)
    f = rf.zero_profile()
    eq = rf.solve(p, f)
    u0 = np.full(4, 1e-3)
    T = 5 * p.M / p.A
    traj = simulate_full(p, eq, f, T=T, steps=2048, samples=256, u0=u0)
    want = 1e-3 * np.exp(-p.A * traj.times / p.M)
    got = traj.u[:, 0]
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-18)
    assert not traj.meta["window_exited"]  # u0 below the window half-width


def test_window_exit_flagged():
    p = rf.SystemParams(N=4, alpha=1e-12, M=0.7, g=0.0, A=1.3, V=1.0,
                        A0=-1.3)
    f = rf.zero_profile()
    eq = rf.solve(p, f)
    traj = simulate_full(p, eq, f, T=0.1, steps=256, samples=64,
                         u0=np.full(4, 2 * p.mean_gap))
    assert traj.meta["window_exited"]


def test_uncalibrated_friction_rejected(friendly32):
    p, f, w, eq = friendly32
    bad = rf.SystemParams(**{**p.__dict__, "A0": p.A0 + 0.1})
    with pytest.raises(ValueError, match="calibrated"):
        simulate_full(bad, eq, f, T=0.1, steps=64, samples=32)


def test_linear_cutoff_zero_drive_is_zero():
    p, f, eq = _uniform_zero_drive()
    traj = simulate_linear_cutoff(p, eq, f, T=0.5, steps=128, samples=64,
                                  substeps=1)
    assert np.max(np.abs(traj.y)) == 0.0


def test_linear_cutoff_rk45_agrees_with_exponential(friendly32):
    p, f, w, eq = friendly32
    sc = derived_scales(p, w)
    T = 2 * sc.t_damp
    a = simulate_linear_cutoff(p, eq, f, T, steps=8192, samples=256, substeps=2)
    b = simulate_linear_cutoff(p, eq, f, T, steps=8192, samples=256,
                               method="rk45", rtol=1e-11, atol=1e-16)
    scale = np.max(np.abs(a.y))
    assert np.max(np.abs(a.y - b.y)) <= 1e-6 * scale


def test_residual_terms_zero_field(friendly32):
    p, f, w, eq = friendly32
    L1, L2, L3 = residual_terms(p, eq, f, np.zeros(p.N), 0.3)
    assert np.all(L1 == 0) and np.all(L2 == 0) and np.all(L3 == 0)


def test_residual_terms_constant_shift(friendly32):
    p, f, w, eq = friendly32
    c = 1e-3
    t = 0.17
    L1, L2, L3 = residual_terms(p, eq, f, np.full(p.N, c), t)
    assert np.all(L2 == 0) and np.all(L3 == 0)
    from ringflow.forcefield import force_eval
    want = p.g * (force_eval(f, eq.x0 + p.V * t + c)
                  - force_eval(f, eq.x0 + p.V * t))
    np.testing.assert_allclose(L1, want, rtol=0, atol=1e-18)


def test_l3_series_matches_closed_form(friendly32):
    p, f, w, eq = friendly32
    for _ in range(10):
        y = np.cumsum(RNG.uniform(-1, 1, p.N))
        y -= y.mean()
        dy = np.roll(y, -1) - y
        y *= 0.1 * np.min(eq.gaps) / np.max(np.abs(dy))
        _, _, L3 = residual_terms(p, eq, f, y, 0.0)
        series = l3_series(p, eq, y, m_max=30)
        scale = np.max(np.abs(L3))
        assert scale > 0
        assert np.max(np.abs(L3 - series)) <= 1e-12 * scale


def test_gap_collapse_detected(friendly32):
    p, f, w, eq = friendly32
    y0 = np.zeros(p.N)
    y0[5] = -(1 - 1e-9) * eq.gaps[4]  # particle 5 nearly on top of particle 4
    with pytest.raises(GapCollapseError):
        simulate_full(p, eq, f, T=0.01, steps=64, samples=32, y0=y0)


def test_consistency_identity_rigid_rotation():
    p, f, eq = _uniform_zero_drive()
    traj = simulate_full(p, eq, f, T=0.5, steps=256, samples=128)
    rep = consistency_identity(p, eq, f, traj)
    assert rep.fd_defect == 0.0
    assert rep.algebra_defect <= 1e-14


def test_consistency_identity_richardson(friendly32):
    p, f, w, eq = friendly32
    sc = derived_scales(p, w)
    T = 5 * 2 * np.pi / sc.omega_max
    reps = []
    for steps in (512, 1024):
        traj = simulate_full(p, eq, f, T, steps=steps, samples=steps)
        reps.append(consistency_identity(p, eq, f, traj))
    # defect is finite-difference limited: halving the sampling step must
    # shrink it by about the square
    assert reps[0].fd_defect / reps[1].fd_defect > 2.5
    assert reps[1].algebra_defect <= 1e-12 * reps[1].term_scale + 1e-15


def test_linear_trajectory_defect_measures_dropped_terms(friendly32):
    # the cut-off solution does not satisfy the full equations; its defect
    # must match the size of the neglected couplings
    p, f, w, eq = friendly32
    sc = derived_scales(p, w)
    T = 5 * 2 * np.pi / sc.omega_max
    steps = 2048
    lin = simulate_linear_cutoff(p, eq, f, T, steps=steps, samples=steps,
                                 substeps=1)
    traj_lin = Trajectory(times=lin.times, y=lin.y, u=lin.u, x0=eq.x0.copy(),
                          V=p.V)
    full = simulate_full(p, eq, f, T, steps=steps, samples=steps)
    rep_lin = consistency_identity(p, eq, f, traj_lin)
    rep_full = consistency_identity(p, eq, f, full)
    assert rep_lin.fd_defect > 3 * rep_full.fd_defect
    L1, L2, L3 = residual_terms(p, eq, f, lin.y[1:-1], lin.times[1:-1])
    dropped = np.max(np.abs(L1 + L2 + L3))
    assert rep_lin.fd_defect == pytest.approx(dropped, rel=0.7)


def test_energy_balance(friendly32):
    p, f, w, eq = friendly32
    sc = derived_scales(p, w)
    T = sc.t_damp
    steps = 1 << 14  # sampling must resolve the fastest mode for Simpson
    traj = simulate_full(p, eq, f, T, steps=steps, samples=steps // 2)
    rep = energy_balance(p, eq, f, traj)
    assert rep["defect_rel"] <= 1e-6


def test_ordering_preserved(friendly32):
    p, f, w, eq = friendly32
    sc = derived_scales(p, w)
    traj = simulate_full(p, eq, f, 5 * sc.t_damp, steps=4096, samples=512)
    assert traj.meta["min_gap"] > 0
    pos = traj.positions
    assert np.all(np.diff(pos, axis=1) > 0)
    gaps_end = np.diff(np.concatenate([pos[-1], [pos[-1][0] + p.L]]))
    assert np.all(gaps_end > 0)


def test_trajectory_views(friendly32):
    p, f, w, eq = friendly32
    traj = simulate_full(p, eq, f, 0.05, steps=64, samples=32)
    dev = traj.deviations()
    np.testing.assert_array_equal(dev.y, traj.y)
    assert traj.velocities.shape == traj.y.shape
    assert traj.meta["params_hash"] == p.digest()
