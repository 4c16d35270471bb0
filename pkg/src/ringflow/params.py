"""Model parameters, derived scales, and the operating-regime checker.

The chain has macro parameters (ring length L, drive shape, target velocity
V, horizon fraction beta) that stay fixed as the particle number N grows,
and micro parameters (mass M, drive scale g, coupling alpha, friction slope
A) that shrink with N.  The transport regime requires a sandwich of
inequalities between them; `check_conditions` evaluates each one with a
numeric margin instead of raising, because runs deliberately outside the
regime (e.g. negative controls) are legitimate experiments.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

__all__ = [
    "SystemParams",
    "DerivedScales",
    "ConditionEntry",
    "RegimeReport",
    "from_exponents",
    "calibrate_friction",
    "check_conditions",
    "derived_scales",
    "exponents_in_scaling_region",
    "find_feasible_exponents",
]


class ParameterError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class SystemParams:
    """All scalar model parameters.

    N      -- particle count (>= 3)
    L      -- ring circumference
    M      -- particle mass
    alpha  -- repulsion coupling (force * length^2)
    g      -- external drive scale (force)
    A0     -- friction offset, calibrated so A0 + A*V equals the effective
              drive force w of the attached profile
    A      -- friction slope (> 0)
    V      -- target macroscopic velocity (> 0)
    rho    -- small dimensionless regime constant, default 0.01
    beta   -- horizon fraction, 0 < beta < 1
    """

    N: int
    L: float = 1.0
    M: float = 1.0
    alpha: float = 1.0
    g: float = 0.0
    A0: float = 0.0
    A: float = 1.0
    V: float = 1.0
    rho: float = 0.01
    beta: float = 0.01

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ParameterError(f"N must be an integer >= 3, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        checks = [
            ("L", self.L > 0),
            ("M", self.M > 0),
            ("alpha", self.alpha > 0),
            ("g", self.g >= 0),
            ("A", self.A > 0),
            ("V", self.V > 0),
            ("rho", 0 < self.rho < 1),
            ("beta", 0 < self.beta < 1),
        ]
        bad = [name for name, ok in checks if not ok]
        if bad:
            raise ParameterError(f"parameter constraints violated for: {', '.join(bad)}")

    def friction(self, v):
        """Friction force a(v) = A0 + A v (linear law, extended globally)."""
        return self.A0 + self.A * v

    @property
    def mean_gap(self) -> float:
        return self.L / self.N

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        data = json.loads(text)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {"N"} - set(data)
        if missing:
            raise ParameterError(f"missing parameter keys: {sorted(missing)}")
        return cls(**data)

    def digest(self) -> str:
        return hashlib.md5(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class DerivedScales:
    """Scales derived from SystemParams (and the effective force w)."""

    delta: float          # mean gap L/N
    c_alpha_g: float      # g / alpha
    c_a_g: float          # g / A
    c_w_g: float          # g / w (inf when w == 0)
    omega_max: float      # fastest linear mode frequency
    t_damp: float         # 2M/A, mode-amplitude damping time
    t_horizon: float      # beta * N / c_a_g
    t_horizon_bare: float # beta * N

    def as_dict(self) -> dict:
        return asdict(self)


def derived_scales(p: SystemParams, w: float = 0.0) -> DerivedScales:
    delta = p.L / p.N
    n = math.floor(p.N / 2)  # maximizes 1 - cos(2 pi n / N) over n = 0..N-1
    peak = 1.0 - math.cos(2.0 * math.pi * n / p.N)
    omega_max = math.sqrt(4.0 * p.alpha / p.M * delta**-3 * peak)
    c_a_g = p.g / p.A
    return DerivedScales(
        delta=delta,
        c_alpha_g=p.g / p.alpha,
        c_a_g=c_a_g,
        c_w_g=(p.g / w) if w != 0.0 else math.inf,
        omega_max=omega_max,
        t_damp=2.0 * p.M / p.A,
        t_horizon=(p.beta * p.N / c_a_g) if c_a_g > 0 else math.inf,
        t_horizon_bare=p.beta * p.N,
    )


@dataclass(frozen=True)
class ConditionEntry:
    """One regime inequality: satisfied iff margin < 1 (lhs < rhs form)."""

    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegimeReport:
    entries: tuple
    all_satisfied: bool

    @property
    def violations(self):
        return [e.name for e in self.entries if not e.satisfied]

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "entries": [e.as_dict() for e in self.entries],
            "all_satisfied": self.all_satisfied,
            "violations": self.violations,
        }


def _entry(name, lhs, rhs):
    margin = lhs / rhs if rhs > 0 else math.inf
    return ConditionEntry(name, lhs, rhs, bool(margin < 1.0), margin)


def check_conditions(p: SystemParams, w: float, L0: float = 0.0) -> RegimeReport:
    """Evaluate every regime inequality with numeric margins.

    w is the effective drive force of the attached profile (0 for no drive).
    L0 is the drive support length, used by the coupling-ratio bound; with
    L0 = 0 that bound is trivially satisfied.

    Violations are reported, never raised: parameter sets outside the regime
    are valid experiments (the no-regime physical example, negative
    controls).
    """
    delta = p.L / p.N
    log_n = math.log(p.N)
    entries = []

    # friction calibration a(V) = w, checked as a relative defect
    calib_scale = max(abs(w), abs(p.A * p.V), abs(p.A0))
    defect = abs(p.A0 + p.A * p.V - w)
    rel = defect / calib_scale if calib_scale > 0 else 0.0
    entries.append(ConditionEntry("friction_calibration", defect, 1e-12 * calib_scale,
                                  bool(rel <= 1e-12), rel / 1e-12 if calib_scale > 0 else 0.0))

    # mass sandwich, lower then upper
    entries.append(_entry("mass_lower", p.A**2 / (p.N * p.alpha * p.rho), p.M))
    entries.append(_entry("mass_upper",
                          p.M, p.rho * min(p.alpha / (p.N * log_n), p.A)))
    # drive-to-friction ratio
    entries.append(_entry("drive_friction_ratio", p.g / p.A, p.rho * p.N**-3))
    # oscillatory-root condition (">" normalized to rhs/lhs)
    lhs_roots = p.M * p.alpha * p.N / p.A**2
    rhs_roots = 1.0 / (16.0 * (2.0 * math.pi) ** 2)
    margin = rhs_roots / lhs_roots if lhs_roots > 0 else math.inf
    entries.append(ConditionEntry("oscillatory_roots", lhs_roots, rhs_roots,
                                  bool(margin < 1.0), margin))
    # coupling-ratio boundedness, concretely the gap-series convergence bound
    entries.append(_entry("coupling_ratio_bounded",
                          (p.g / p.alpha) * (1.0 + L0 / p.L) * L0 * delta, 0.5))

    entries = tuple(entries)
    return RegimeReport(entries=entries, all_satisfied=all(e.satisfied for e in entries))


def from_exponents(N: int, gamma1: float, gamma2: float, gamma3: float,
                   gammaA: float = 0.0, rho: float = 0.01, V: float = 1.0,
                   L: float = 1.0, beta: float = 0.01) -> SystemParams:
    """Instantiate micro parameters as powers of N.

    g = N^-gamma1, alpha = N^-gamma2, M = N^-gamma3, A = N^-gammaA.
    No feasibility is implied; run check_conditions on the result.  A0 is
    set for the zero-drive calibration (a(V) = 0); re-run
    calibrate_friction once the effective force of the actual drive is
    known.
    """
    if N < 3:
        raise ParameterError(f"N must be >= 3, got {N}")
    n = float(N)
    A = n**-gammaA
    return SystemParams(N=N, L=L, M=n**-gamma3, alpha=n**-gamma2, g=n**-gamma1,
                        A0=-A * V, A=A, V=V, rho=rho, beta=beta)


def calibrate_friction(p: SystemParams, w: float) -> SystemParams:
    """Return params with A0 = w - A*V so that a(V) = w exactly."""
    return replace(p, A0=w - p.A * p.V)


def exponents_in_scaling_region(gamma1: float, gamma2: float, gamma3: float) -> bool:
    """Membership in the asymptotic scaling region of the exponent family.

    gamma1 > 2, gamma2 > 0, gamma3 > 0, gamma1 > gamma2 and
    1 + 2*gamma1 - gamma2 > gamma3 > max(1 + gamma2, gamma1).
    This region is where the regime inequalities hold for N large enough;
    it need not contain desk-scale feasible points.
    """
    return (gamma1 > 2 and gamma2 > 0 and gamma3 > 0 and gamma1 > gamma2
            and 1 + 2 * gamma1 - gamma2 > gamma3 > max(1 + gamma2, gamma1))


def find_feasible_exponents(N_values=(64, 256), rho: float = 0.01, V: float = 1.0,
                            L0: float = 0.1, step: float = 0.25,
                            gamma1_range=(2.0, 6.0), gamma2_range=(-4.0, 2.0),
                            gamma3_range=(0.0, 5.0), gammaA_range=(0.0, 2.0)):
    """Grid search for exponent tuples feasible at every N in N_values.

    Returns the list of (gamma1, gamma2, gamma3, gammaA) tuples for which
    check_conditions is fully satisfied (with a bump of support L0 assumed
    only through the coupling-ratio bound, w left at 0 which the friction
    calibration absorbs).  Used to pick desk-scale instances.
    """
    import numpy as np

    found = []
    g1s = np.arange(gamma1_range[0], gamma1_range[1] + step / 2, step)
    g2s = np.arange(gamma2_range[0], gamma2_range[1] + step / 2, step)
    g3s = np.arange(gamma3_range[0], gamma3_range[1] + step / 2, step)
    gAs = np.arange(gammaA_range[0], gammaA_range[1] + step / 2, step)
    for g1 in g1s:
        for g2 in g2s:
            for g3 in g3s:
                for gA in gAs:
                    ok = True
                    for N in N_values:
                        p = from_exponents(N, g1, g2, g3, gA, rho=rho, V=V)
                        rep = check_conditions(p, w=0.0, L0=L0)
                        if not rep.all_satisfied:
                            ok = False
                            break
                    if ok:
                        found.append((float(g1), float(g2), float(g3), float(gA)))
    return found
