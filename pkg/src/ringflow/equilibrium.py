"""Static ring configurations with equal effective force on every particle.

With nearest-neighbour repulsion f(r) = alpha/r^2 and drive gF, the target
configuration satisfies

    f(gap_{k-1}) - f(gap_k) + g F(x_k) = w   for every k,

where w = g * mean(F) over the ring is forced by summing the equations.
Positions are gauged by x_1(0) = 0, which drops the k = 1 equation; its
defect (the difference between the particle-sampled mean of F and the
continuum mean) is reported, not suppressed — it is the source of the slow
zero-mode drift in the dynamics.

Everything is solved in relative gap deviations.  At transport-regime
parameters the deviations sit ~12 orders below the gap itself, so forming
them from positions would lose them to roundoff entirely; the residual and
all derived fields are evaluated with the cancellation-free kernels from
`numutil`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .forcefield import ForceProfile, constants, force_eval
from .numutil import inv_cube_m1, inv_sq_diff, inv_sqrt_m1
from .params import SystemParams

__all__ = ["EquilibriumConfig", "EquilibriumReport", "SolverError",
           "compute_w", "solve", "minimize_virtual_potential",
           "solve_via_series", "series_coefficients", "virtual_potential",
           "verify"]


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SeriesDomainError(ValueError):
    """Gap-series argument left the convergence domain (regime violation)."""


@dataclass(frozen=True)
class EquilibriumConfig:
    """Solved configuration.

    x0        -- positions, sorted, x0[0] == 0
    gaps      -- gap_k = x_{k+1} - x_k (periodic wrap), all > 0
    deltas    -- gap_k = delta_ref * (1 + deltas[k]), deltas[0] == 0
    deltas1   -- (1 + deltas)^-3 - 1, the cubic gap transform driving the
                 linear-perturbation coupling
    eps       -- gap_k = (L/N) * (1 + eps[k]); solver-native variables with
                 sum(eps) == 0 (kept because they carry full relative
                 precision; deltas are derived from them)
    w         -- effective drive force
    delta_ref -- reference gap (the first one)
    """

    x0: np.ndarray
    gaps: np.ndarray
    deltas: np.ndarray
    deltas1: np.ndarray
    eps: np.ndarray
    w: float
    delta_ref: float
    residual: np.ndarray = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return len(self.x0)

    def as_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "w": self.w,
                "gaps": self.gaps.tolist(), "deltas": self.deltas.tolist()}


def compute_w(f: ForceProfile, g: float, L: float) -> float:
    """Effective drive force w = g * (1/L) * integral of F over the ring."""
    if f.kind == "zero" or g == 0.0:
        return 0.0
    return g * constants(f).C_int / L


def _positions(eps: np.ndarray, mean_gap: float) -> np.ndarray:
    cum = np.concatenate(([0.0], np.cumsum(eps)[:-1]))
    return mean_gap * (np.arange(len(eps)) + cum)


def _residual(eps, p: SystemParams, f: ForceProfile, w: float) -> np.ndarray:
    """r_k = f(gap_{k-1}) - f(gap_k) + g F(x_k) - w, stable small-eps form."""
    dm = p.mean_gap
    x = _positions(eps, dm)
    prev = np.roll(eps, 1)
    force_diff = (p.alpha / dm**2) * inv_sq_diff(prev, eps)
    return force_diff + p.g * force_eval(f, x) - w


def solve(p: SystemParams, f: ForceProfile, tol: float = 1e-10,
          max_iter: int = 60) -> EquilibriumConfig:
    """Damped Newton solve for the equal-effective-force configuration.

    Unknowns are the relative gap deviations eps (one per gap) plus the
    closure sum(eps) = 0; equations are the force balances for k = 2..N
    (k = 1 is dropped by the gauge).  The Jacobian is tridiagonal from the
    repulsion plus a closure row and a lower-triangular drive coupling of
    size g; it is assembled exactly and solved densely, which is cheap at
    desk scale and keeps Newton quadratic.

    tol is the acceptance threshold on max|r_k| relative to the natural
    repulsion force scale alpha/delta^2; iteration continues to the
    roundoff floor below it.
    """
    s = constants(f)
    if f.kind != "zero" and (p.g / p.alpha) * (1 + f.L0 / p.L) * f.L0 * p.mean_gap > 0.5:
        raise SolverError("coupling ratio too large: gap series diverges; "
                          "no perturbative equilibrium")
    w = compute_w(f, p.g, p.L)
    N, dm = p.N, p.mean_gap
    force_scale = p.alpha / dm**2

    eps = np.zeros(N)
    best = None
    for _ in range(max_iter):
        r = _residual(eps, p, f, w)
        rhs = -r
        rhs[0] = -np.sum(eps)  # closure replaces the gauged-out equation
        err = max(np.max(np.abs(r[1:])), abs(rhs[0]) * force_scale)
        if best is None or err < best[0]:
            best = (err, eps.copy())

        x = _positions(eps, dm)
        prev = np.roll(eps, 1)
        # drive coupling: x_k depends on eps_j for j < k (lower triangle)
        fp = p.g * force_eval(f, x, 1) * dm
        J = np.tril(np.broadcast_to(fp[:, None], (N, N)), -1).copy()
        idx = np.arange(1, N)
        J[idx, idx - 1] += -2.0 * force_scale * (1.0 + prev[1:]) ** -3
        J[idx, idx] += 2.0 * force_scale * (1.0 + eps[1:]) ** -3
        J[0, :] = 1.0
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Jacobian: {exc}", residual=r) from exc

        # damped update: keep every gap positive
        lam = 1.0
        for _ in range(60):
            trial = eps + lam * step
            if np.all(1.0 + trial > 0):
                break
            lam *= 0.5
        else:
            raise SolverError("damping floor reached: negative gap persists",
                              residual=r)
        eps = eps + lam * step
        # converge to the roundoff floor: the requested tolerance is only
        # verified afterwards, so the deviation field keeps full relative
        # precision even when the uniform start already beats it
        if np.max(np.abs(lam * step)) < 1e-16 * (1.0 + np.max(np.abs(eps))):
            r = _residual(eps, p, f, w)
            err = max(np.max(np.abs(r[1:])), abs(np.sum(eps)) * force_scale)
            if err < best[0]:
                best = (err, eps.copy())
            break

    eps = best[1]
    r = _residual(eps, p, f, w)
    if np.max(np.abs(r[1:])) > tol * force_scale:
        raise SolverError(
            f"Newton did not reach tolerance: max residual "
            f"{np.max(np.abs(r[1:])):.3e} > {tol * force_scale:.3e}",
            residual=r)
    return _config_from_eps(eps, p, w, r)


def _config_from_eps(eps, p: SystemParams, w: float, r) -> EquilibriumConfig:
    dm = p.mean_gap
    x0 = _positions(eps, dm)
    deltas = (eps - eps[0]) / (1.0 + eps[0])
    delta_ref = dm * (1.0 + eps[0])
    gaps = delta_ref * (1.0 + deltas)
    return EquilibriumConfig(x0=x0, gaps=gaps, deltas=deltas,
                             deltas1=inv_cube_m1(deltas), eps=eps,
                             w=w, delta_ref=delta_ref, residual=r)


def minimize_virtual_potential(p: SystemParams, f: ForceProfile,
                               sweeps: int = 20000, xtol: float = 1e-15) -> EquilibriumConfig:
    """Direct minimization of U + sum_k W(x_k) by cyclic coordinate descent.

    Independent route to the same configuration: with x_1 fixed at 0, each
    inner step moves one particle to the zero of its own force balance
    (1-D Newton on the gradient of the virtual potential), cycling until no
    particle moves.  Slow but simple; intended as a cross-check at modest N.
    """
    w = compute_w(f, p.g, p.L)
    N, dm = p.N, p.mean_gap
    eps = np.zeros(N)
    x = dm * np.arange(N, dtype=float)  # kept in sync: only x_k moves per step
    force_scale = p.alpha / dm**2

    for _ in range(sweeps):
        moved = 0.0
        for k in range(1, N):
            # moving particle k by dm*de changes gap_{k-1} by +dm*de and
            # gap_k by -dm*de; other positions are unaffected
            for _ in range(40):
                fd = force_scale * inv_sq_diff(eps[k - 1], eps[k])
                grad = -(fd + p.g * force_eval(f, x[k]) - w)
                curv = 2.0 * force_scale * ((1.0 + eps[k - 1]) ** -3
                                            + (1.0 + eps[k]) ** -3) \
                    - p.g * force_eval(f, x[k], 1) * dm
                de = -grad / curv if curv > 0 else -grad / force_scale
                cap = 0.4 * min(1.0 + eps[k - 1], 1.0 + eps[k])
                de = float(np.clip(de, -cap, cap))
                eps[k - 1] += de
                eps[k] -= de
                x[k] += dm * de
                moved = max(moved, abs(de))
                if abs(de) < xtol:
                    break
        if moved < xtol:
            break
    # cyclic pair moves preserve sum(eps) = 0 exactly up to roundoff
    r = _residual(eps, p, f, w)
    return _config_from_eps(eps, p, w, r)


_SERIES_CACHE = {}


def series_coefficients(m_max: int) -> np.ndarray:
    """Coefficients a_m of (1+Q)^-1/2 - 1 = sum a_m Q^m, exact to float.

    (-1)^m a_m = (2m)!/(2^m m!)^2, computed by exact integer arithmetic;
    a_0 = 0 by convention (the series has no constant term).
    """
    if m_max in _SERIES_CACHE:
        return _SERIES_CACHE[m_max]
    out = np.zeros(m_max + 1)
    num, den = 1, 1  # exact integers: num = (2m)!, den = (2^m m!)^2
    for m in range(1, m_max + 1):
        num *= 2 * m * (2 * m - 1)
        den *= 4 * m * m
        out[m] = (-1) ** m * (num / den)
    _SERIES_CACHE[m_max] = out
    return out


def solve_via_series(p: SystemParams, f: ForceProfile, x0: np.ndarray,
                     delta_ref: float = None, w: float = None):
    """Gap deviations from the summed balance equations at given positions.

    Q_k = (delta_ref^2/alpha) * sum_{i=2..k} (g F(x_i) - w); the deviation
    is delta_k = (1+Q_k)^-1/2 - 1, returned both in closed form and by the
    truncated power series (truncation where |Q|^m drops below 1e-16).
    Returns (deltas_closed, deltas_series, Q).
    """
    if w is None:
        w = compute_w(f, p.g, p.L)
    if delta_ref is None:
        delta_ref = x0[1] - x0[0] if len(x0) > 1 else p.mean_gap
    terms = p.g * force_eval(f, x0) - w
    Q = (delta_ref**2 / p.alpha) * np.concatenate(([0.0], np.cumsum(terms[1:])))
    if np.any(Q <= -1.0):
        raise SeriesDomainError("Q_k <= -1: outside the series domain")
    closed = inv_sqrt_m1(Q)
    qmax = np.max(np.abs(Q))
    if qmax >= 1.0:
        raise SeriesDomainError("|Q_k| >= 1: series does not converge")
    m_max = 1 if qmax == 0 else min(200, max(1, int(math.ceil(
        -16.0 * math.log(10.0) / math.log(qmax)))))
    a = series_coefficients(m_max)
    series = np.zeros_like(Q)
    Qp = np.ones_like(Q)
    for m in range(1, m_max + 1):
        Qp = Qp * Q
        series += a[m] * Qp
    return closed, series, Q


def virtual_potential(f: ForceProfile, g: float, w: float, x) -> float:
    """W(x) = -int_0^x (g F - w): potential of the net drive.

    Single-valued on the circle only when w matches the effective force of
    (f, g); a mismatch beyond 1e-10 of the drive scale raises.
    """
    c_int = constants(f).C_int
    defect = abs(g * c_int - f.L * w)
    scale = max(abs(g) * max(c_int, f.L0), abs(w) * f.L, 1e-300)
    if defect > 1e-10 * scale:
        raise ValueError("w inconsistent with the drive: potential would be "
                         f"multivalued (defect {defect:.3e})")

    lo, hi = (f.support() if f.kind != "zero" else (0.0, 0.0))

    def _integral_F(xv: float) -> float:
        # int_0^xv F, using the support as quadrature breakpoints
        if f.kind == "zero":
            return 0.0
        pts = sorted({0.0, xv, max(0.0, min(lo, xv)), max(0.0, min(hi, xv))})
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            if b > a:
                val, _ = quad(lambda s: force_eval(f, s), a, b,
                              epsabs=1e-16, epsrel=1e-12, limit=200)
                total += val
        return total

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([w * xv - g * _integral_F(xv) for xv in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class EquilibriumReport:
    """Deviation metrics of a solved configuration against their bounds."""

    residual_max: float
    residual_rel: float          # vs alpha/delta^2
    gauge_defect: float          # dropped first equation, same normalization
    delta_max: float
    delta_max_bound: float       # 4 (g/alpha) L0 delta
    delta_step_max: float
    delta_step_bound: float      # 2 (g/alpha) delta^2
    gap_uniformity: float        # max |gap_k N / L - 1|
    gap_variation_sum: float     # sum |gap_k - gap_{k-1}|
    gap_variation_bound: float   # 2 (g/alpha) delta^2
    bounds_ok: bool

    def rows(self):
        return [
            ("gap_deviation_max", self.delta_max, self.delta_max_bound),
            ("gap_deviation_step", self.delta_step_max, self.delta_step_bound),
            ("gap_total_variation", self.gap_variation_sum, self.gap_variation_bound),
        ]

    def as_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def verify(eq: EquilibriumConfig, p: SystemParams, f: ForceProfile) -> EquilibriumReport:
    dm = p.mean_gap
    force_scale = p.alpha / dm**2
    r = eq.residual if eq.residual is not None else _residual(eq.eps, p, f, eq.w)
    c_ag = p.g / p.alpha
    L0 = f.L0 if f.kind != "zero" else 0.0

    dsteps = np.abs(np.diff(eq.deltas))
    delta_max = float(np.max(np.abs(eq.deltas)))
    delta_step_max = float(np.max(dsteps)) if len(dsteps) else 0.0
    gap_var = float(np.sum(np.abs(eq.gaps - np.roll(eq.gaps, 1))))
    bound_delta = 4.0 * c_ag * L0 * dm
    bound_step = 2.0 * c_ag * dm**2

    ok = (delta_max <= bound_delta + 1e-30) and (delta_step_max <= bound_step + 1e-30) \
        and (gap_var <= bound_step + 1e-30)
    return EquilibriumReport(
        residual_max=float(np.max(np.abs(r[1:]))) if p.N > 1 else 0.0,
        residual_rel=float(np.max(np.abs(r[1:])) / force_scale),
        gauge_defect=float(abs(r[0]) / force_scale),
        delta_max=delta_max,
        delta_max_bound=bound_delta,
        delta_step_max=delta_step_max,
        delta_step_bound=bound_step,
        gap_uniformity=float(np.max(np.abs(eq.gaps * p.N / p.L - 1.0))),
        gap_variation_sum=gap_var,
        gap_variation_bound=bound_step,
        bounds_ok=bool(ok),
    )
