"""Macro-homogeneity metrics and the aggregated bound dashboard.

A trajectory is macro-homogeneous when every velocity stays near the target
V and the empirical density over macroscopic arcs stays near uniform,
simultaneously over the whole horizon.  The density supremum over all arcs
is approximated by a fixed dyadic family (lengths L/2 .. L/16 at offsets of
half their length), which is reproducible and covers the circle at every
scale twice over.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import Trajectory
from .params import SystemParams, RegimeReport

__all__ = ["HomogeneityReport", "homogeneity", "window_family",
           "window_counts", "bound_dashboard"]

WINDOW_DEPTHS = (1, 2, 3, 4)  # arc lengths L/2 .. L/16


@dataclass(frozen=True)
class HomogeneityReport:
    v_spread: float             # sup |v_i(t) - V|
    v_spread_rel: float
    density_err: float          # sup over dyadic arcs of |N(I,t)/N - |I|/L|
    density_err_half: float     # same, length-L/2 arcs only
    y_max: float
    y_max_over_delta: float
    window_exits: int           # samples with any velocity outside (V-d, V+d)
    horizon: float
    fitted_V: float             # drift-fit of the mean position

    def as_dict(self) -> dict:
        return asdict(self)


def window_family(L: float):
    """(offset, length) pairs: dyadic arc lengths at half-length offsets."""
    out = []
    for depth in WINDOW_DEPTHS:
        ln = L / 2**depth
        for j in range(2 ** (depth + 1)):
            out.append((j * ln / 2.0, ln))
    return out


def window_counts(wrapped_sorted: np.ndarray, lo: float, ln: float, L: float) -> int:
    """Particles in the half-open arc [lo, lo+ln) of the circle."""
    lo = lo % L
    hi = lo + ln
    if hi <= L:
        return int(np.searchsorted(wrapped_sorted, hi, side="left")
                   - np.searchsorted(wrapped_sorted, lo, side="left"))
    # wraps: [lo, L) plus [0, hi-L)
    return int(len(wrapped_sorted)
               - np.searchsorted(wrapped_sorted, lo, side="left")
               + np.searchsorted(wrapped_sorted, hi - L, side="left"))


def homogeneity(traj: Trajectory, p: SystemParams) -> HomogeneityReport:
    delta = p.mean_gap
    u = traj.u
    y = traj.y
    v_spread = float(np.max(np.abs(u)))
    y_max = float(np.max(np.abs(y)))
    exits = int(np.sum(np.any(np.abs(u) >= delta, axis=1)))

    fam = window_family(p.L)
    worst = 0.0
    worst_half = 0.0
    pos = traj.positions
    N = traj.N
    for row in pos:
        xs = np.sort(np.mod(row, p.L))
        for lo, ln in fam:
            err = abs(window_counts(xs, lo, ln, p.L) / N - ln / p.L)
            worst = max(worst, err)
            if ln == p.L / 2:
                worst_half = max(worst_half, err)

    # drift fit: slope of the particle-averaged unwrapped position
    tt = traj.times
    mean_pos = np.mean(pos, axis=1)
    denom = np.sum((tt - tt.mean()) ** 2)
    fitted = float(np.sum((tt - tt.mean()) * (mean_pos - mean_pos.mean())) / denom) \
        if denom > 0 else float("nan")

    return HomogeneityReport(
        v_spread=v_spread,
        v_spread_rel=v_spread / p.V,
        density_err=worst,
        density_err_half=worst_half,
        y_max=y_max,
        y_max_over_delta=y_max / delta,
        window_exits=exits,
        horizon=float(traj.times[-1]),
        fitted_V=fitted,
    )


def bound_dashboard(regime: RegimeReport = None, equilibrium=None,
                    mode_bounds=None, kernel=None, probe: dict = None,
                    homogeneity_report: HomogeneityReport = None) -> dict:
    """Aggregate every bound check into one verdict.

    One row per bound: name, lhs, rhs (NaN for measured-ratio rows),
    status pass/fail/stable.  When the regime conditions are violated the
    dependent mode/kernel/contraction rows are marked not_applicable
    instead of judged.  Missing sections set the incomplete flag.
    """
    rows = []
    regime_ok = regime.all_satisfied if regime is not None else False

    def add(name, lhs, rhs, ok, kind="explicit", dependent=True):
        if dependent and regime is not None and not regime_ok:
            status = "not_applicable"
        elif kind == "ratio":
            status = "stable"
        else:
            status = "pass" if ok else "fail"
        rows.append({"name": name, "lhs": lhs, "rhs": rhs,
                     "kind": kind, "status": status})

    if regime is not None:
        for e in regime.entries:
            rows.append({"name": f"regime:{e.name}", "lhs": e.lhs, "rhs": e.rhs,
                         "kind": "regime",
                         "status": "pass" if e.satisfied else "fail"})
    if equilibrium is not None:
        for name, lhs, rhs in equilibrium.rows():
            add(f"equilibrium:{name}", lhs, rhs, lhs <= rhs)
    for rep, prefix in ((mode_bounds, "modes"), (kernel, "kernel")):
        if rep is not None:
            for r in rep.rows:
                add(f"{prefix}:{r.name}", r.lhs, r.rhs, r.passed, r.kind)
    if probe is not None:
        add("contraction:q", probe["q"], 1.0, probe["q"] < 1.0)
    if homogeneity_report is not None:
        h = homogeneity_report
        add("homogeneity:window_exits", float(h.window_exits), 0.0,
            h.window_exits == 0)
        add("homogeneity:y_below_gap", h.y_max_over_delta, 1.0,
            h.y_max_over_delta <= 1.0)

    missing = [name for name, rep in (("regime", regime),
                                      ("equilibrium", equilibrium),
                                      ("mode_bounds", mode_bounds),
                                      ("kernel", kernel),
                                      ("contraction", probe)) if rep is None]
    applicable = [r for r in rows if r["status"] in ("pass", "fail")]
    return {
        "rows": rows,
        "regime_ok": regime_ok,
        "incomplete": bool(missing),
        "missing": missing,
        "all_passed": bool(applicable) and all(r["status"] == "pass" for r in applicable),
    }
