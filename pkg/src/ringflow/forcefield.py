"""External drive profiles on the ring.

The drive F is smooth, compactly supported on an arc of length L0 < L, and
normalized to unit peak.  The canonical profile is the standard smooth bump
exp(1 - 1/(1 - u^2)) on |u| < 1 with u = 2(x - center)/L0: infinitely
differentiable, exactly zero outside the arc, analytic derivatives.  Tabled
profiles are interpolated with a quintic spline clamped to zero value and
zero first/second derivative at the support edges, so they are C^2 on the
circle like the analytic bump.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize_scalar

__all__ = ["ForceProfile", "ForceConstants", "bump_profile", "zero_profile",
           "table_profile", "force_eval", "constants", "phi_k", "phi_all"]

MIN_SUPPORT_SAMPLES = 10_000  # dense-sampling floor for the max-of-derivative scan


class UnsupportedOrderError(ValueError):
    """Derivative order above 2 requested."""


@dataclass(frozen=True)
class ForceProfile:
    kind: str                 # "zero" | "bump" | "custom-table"
    L: float = 1.0
    L0: float = 0.0
    center: float = 0.0
    amplitude: float = 1.0
    xs: tuple = ()
    values: tuple = ()
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "bump", "custom-table"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind != "zero" and not (0 < self.L0 < self.L):
            raise ValueError("support length must satisfy 0 < L0 < L")
        if self.kind == "custom-table":
            xs = np.asarray(self.xs, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if xs.size < 6 or xs.size != vals.size:
                raise ValueError("custom-table needs >= 6 (x, value) pairs")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("custom-table xs must be strictly increasing")
            if vals[0] != 0.0 or vals[-1] != 0.0:
                raise ValueError("custom-table values must vanish at the support edges")
            bc = ([(1, 0.0), (2, 0.0)], [(1, 0.0), (2, 0.0)])
            spl = make_interp_spline(xs, vals, k=5, bc_type=bc)
            object.__setattr__(self, "_spline", spl)

    def support(self):
        """(lo, hi) of the arc where F may be nonzero, in unwrapped coords."""
        return self.center - self.L0 / 2.0, self.center + self.L0 / 2.0

    def to_json(self) -> str:
        if self.kind == "custom-table":
            data = {"kind": self.kind, "L": self.L, "xs": list(self.xs),
                    "values": list(self.values), "amplitude": self.amplitude}
        else:
            data = {"kind": self.kind, "L": self.L, "L0": self.L0,
                    "center": self.center, "amplitude": self.amplitude}
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ForceProfile":
        kind = data.get("kind")
        if kind == "zero":
            return zero_profile(L=data.get("L", 1.0))
        if kind == "bump":
            return bump_profile(L0=data["L0"], center=data["center"],
                                amplitude=data.get("amplitude", 1.0),
                                L=data.get("L", 1.0))
        if kind == "custom-table":
            return table_profile(data["xs"], data["values"],
                                 amplitude=data.get("amplitude", 1.0),
                                 L=data.get("L", 1.0))
        raise ValueError(f"unknown profile kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "ForceProfile":
        return cls.from_dict(json.loads(text))


def zero_profile(L: float = 1.0) -> ForceProfile:
    return ForceProfile(kind="zero", L=L)


def bump_profile(L0: float = 0.1, center: float = 0.5, amplitude: float = 1.0,
                 L: float = 1.0) -> ForceProfile:
    return ForceProfile(kind="bump", L=L, L0=L0, center=center, amplitude=amplitude)


def table_profile(xs, values, amplitude: float = 1.0, L: float = 1.0) -> ForceProfile:
    xs = tuple(float(x) for x in xs)
    values = tuple(float(v) for v in values)
    L0 = xs[-1] - xs[0]
    center = 0.5 * (xs[-1] + xs[0])
    return ForceProfile(kind="custom-table", L=L, L0=L0, center=center,
                        amplitude=amplitude, xs=xs, values=values)


def _bump_core(u: np.ndarray, m: int) -> np.ndarray:
    """m-th u-derivative of exp(1 - 1/(1-u^2)) on |u| < 1, zero outside."""
    out = np.zeros_like(u)
    mask = np.abs(u) < 1.0
    um = u[mask]
    s = 1.0 - um * um
    with np.errstate(under="ignore"):
        e = np.exp(1.0 - 1.0 / s)
    if m == 0:
        out[mask] = e
    elif m == 1:
        out[mask] = e * (-2.0 * um / s**2)
    else:
        out[mask] = e * (4.0 * um * um / s**4 - 2.0 / s**2 - 8.0 * um * um / s**3)
    return out


def force_eval(f: ForceProfile, x, m: int = 0):
    """F^(m)(x) for m in {0, 1, 2}; x interpreted modulo the ring length."""
    if m not in (0, 1, 2):
        raise UnsupportedOrderError(f"derivative order must be 0, 1 or 2, got {m}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if f.kind == "zero":
        out = np.zeros_like(x)
        return float(out[0]) if scalar else out

    # reduce to displacement from the support center, folded to (-L/2, L/2]
    rel = np.mod(x - f.center + 0.5 * f.L, f.L) - 0.5 * f.L
    if f.kind == "bump":
        u = 2.0 * rel / f.L0
        out = f.amplitude * _bump_core(u, m) * (2.0 / f.L0) ** m
    else:
        lo, hi = f.support()
        xi = rel + f.center
        inside = (xi > lo) & (xi < hi)
        out = np.zeros_like(x)
        if np.any(inside):
            spl = f._spline if m == 0 else f._spline.derivative(m)
            out[inside] = f.amplitude * spl(xi[inside])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ForceConstants:
    """Extrema and integral of the drive: C_m = max |F^(m)|, m = 0, 1, 2."""

    C0: float
    C1: float
    C2: float
    C_int: float
    CF_combined: float  # 6*C2 + 24*C1, the combined drive constant

    def as_dict(self) -> dict:
        return {"C0": self.C0, "C1": self.C1, "C2": self.C2,
                "C_int": self.C_int, "CF_combined": self.CF_combined}


def constants(f: ForceProfile) -> ForceConstants:
    """Compute C_m by dense sampling plus local refinement, C_int by quadrature."""
    if f.kind == "zero":
        return ForceConstants(0.0, 0.0, 0.0, 0.0, 0.0)
    lo, hi = f.support()
    xs = np.linspace(lo, hi, MIN_SUPPORT_SAMPLES + 1)
    cs = []
    for m in range(3):
        vals = np.abs(force_eval(f, xs, m))
        i = int(np.argmax(vals))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(lambda x: -abs(force_eval(f, float(x), m)),
                              bounds=(a, b), method="bounded",
                              options={"xatol": 1e-14})
        cs.append(max(vals[i], -res.fun))
    c_int, _ = quad(lambda x: force_eval(f, float(x), 0), lo, hi,
                    epsabs=0.0, epsrel=1e-12, limit=200)
    return ForceConstants(cs[0], cs[1], cs[2], c_int, 6.0 * cs[2] + 24.0 * cs[1])


def phi_all(f: ForceProfile, x0: np.ndarray, V: float, t) -> np.ndarray:
    """Drive increment F(x_k(0) + V t) - F(x_k(0)) for all particles.

    Accepts scalar t (returns shape (N,)) or array t (returns (N, len(t))).
    """
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return force_eval(f, x0 + V * float(t)) - force_eval(f, x0)
    args = x0[:, None] + V * t[None, :]
    return force_eval(f, args) - force_eval(f, x0)[:, None]


def phi_k(f: ForceProfile, x0: np.ndarray, V: float, k: int, t: float) -> float:
    """Single-particle drive increment; k is a 0-based particle index."""
    n = len(x0)
    if not (0 <= k < n):
        raise IndexError(f"particle index {k} out of range 0..{n - 1}")
    return float(force_eval(f, x0[k] + V * t) - force_eval(f, x0[k]))
