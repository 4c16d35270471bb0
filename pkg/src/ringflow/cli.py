"""Batch experiment runner.

Subcommands mirror the library pipelines:

  equilibrium  solve the static configuration and verify its bounds
  simulate     full nonlinear run plus homogeneity metrics
  linear       cut-off linear system: analytic vs direct integration
  picard       fixed point of the mode-form deviation equations + probes
  regime       parameter-condition report
  sweep        repeat a subcommand over a list of N
  verify       full bound dashboard (everything above, aggregated)

Each run reads one JSON config and writes JSON reports, CSV series and
rendered PNG figures into the output directory.  Runs are deterministic:
the only randomness (contraction probes) is seeded.  Exit codes: 0 success
(regime violations are still reported as success), 2 config/schema error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, dynamics, equilibrium, picard, plots, spectral
from .forcefield import ForceProfile, constants
from .params import (SystemParams, calibrate_friction, check_conditions,
                     derived_scales, from_exponents)
from .reports import (ConfigError, load_config, write_csv, write_json,
                      write_modes_csv, write_trajectory_binary,
                      write_trajectory_csv)

DEFAULT_OUT_ENV = "RINGFLOW_OUT"


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def build_params(cfg: dict) -> SystemParams:
    if "params" in cfg:
        return SystemParams.from_dict(cfg["params"])
    e = dict(cfg["exponents"])
    return from_exponents(e.pop("N"), e.pop("gamma1"), e.pop("gamma2"),
                          e.pop("gamma3"), e.pop("gammaA", 0.0), **e)


def build_force(cfg: dict, L: float) -> ForceProfile:
    data = dict(cfg["force"])
    data.setdefault("L", L)
    return ForceProfile.from_dict(data)


def resolve_horizon(cfg: dict, p: SystemParams) -> float:
    h = cfg.get("horizon", {"mode": "damping-times", "value": 20})
    mode, value = h["mode"], h["value"]
    if mode == "damping-times":
        return value * 2.0 * p.M / p.A
    if mode == "beta-N":
        return value * p.N
    return float(value)


def _prepare(cfg: dict):
    p = build_params(cfg)
    f = build_force(cfg, p.L)
    w = equilibrium.compute_w(f, p.g, p.L)
    p = calibrate_friction(p, w)
    return p, f, w


def _steps(cfg, default, samples):
    steps = int(cfg.get("steps", default))
    samples = int(cfg.get("samples", samples))
    if steps % samples:
        steps = (steps // samples + 1) * samples
    return steps, samples


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_equilibrium(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    eq = equilibrium.solve(p, f)
    rep = equilibrium.verify(eq, p, f)
    report = {"N": p.N, "w": w, **rep.as_dict()}
    write_json(out / "equilibrium_report.json", report, "equilibrium_report")
    write_csv(out / "equilibrium.csv", ["k", "x", "gap", "delta"],
              [np.arange(1, p.N + 1), eq.x0, eq.gaps, eq.deltas])
    plots.fig_equilibrium(eq, p, f, out / "fig_equilibrium.png")
    return 0


def cmd_regime(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    L0 = f.L0 if f.kind != "zero" else 0.0
    rep = check_conditions(p, w, L0=L0)
    scales = derived_scales(p, w)
    report = {**rep.as_dict(), "params": json.loads(p.to_json()),
              "scales": scales.as_dict()}
    write_json(out / "regime_report.json", report, "regime_report")
    write_csv(out / "regime.csv", ["name", "lhs", "rhs", "margin", "satisfied"],
              [[e.name for e in rep.entries], [e.lhs for e in rep.entries],
               [e.rhs for e in rep.entries], [e.margin for e in rep.entries],
               [int(e.satisfied) for e in rep.entries]])
    plots.fig_regime([e.as_dict() for e in rep.entries], out / "fig_regime.png")
    return 0


def cmd_linear(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    eq = equilibrium.solve(p, f)
    T = resolve_horizon(cfg, p)
    steps, samples = _steps(cfg, 32768, 1024)
    substeps = int(cfg.get("substeps", 3))

    t = np.linspace(0.0, T, steps + 1)
    field, y_spec, _ = spectral.linear_solution(p, eq, f, t)
    ode = dynamics.simulate_linear_cutoff(p, eq, f, T, steps, samples=samples,
                                          substeps=substeps)
    stride = steps // samples
    ys = y_spec[::stride]
    abs_err = np.max(np.abs(ys - ode.y), axis=1)
    y_scale = float(np.max(np.abs(ys)))
    rel = float(np.max(abs_err) / y_scale) if y_scale > 0 else 0.0

    bounds = spectral.bound_suite(p, eq, f, field)
    env = spectral.zero_mode_envelope(field)
    report = {
        "max_rel_linf_error": rel,
        "max_abs_error": float(np.max(abs_err)),
        "y_scale": y_scale,
        "horizon": T,
        "steps": steps,
        "substeps": substeps,
        "bounds": bounds.as_dict(),
        "envelope": env,
        "weight_sum_constant": spectral.weight_sum_constant(p),
    }
    write_json(out / "linear_report.json", report, "linear_report")
    write_csv(out / "linear_compare.csv", ["t", "max_abs_diff"],
              [ode.times, abs_err])
    write_modes_csv(out / "modes.csv", field, stride=stride)
    ratios = bounds.ratio_profiles["mode_decay_ratio"]
    plots.fig_linear(ode.times, abs_err, y_scale, ratios, out / "fig_linear.png")
    return 0


def cmd_simulate(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    eq = equilibrium.solve(p, f)
    T = resolve_horizon(cfg, p)
    steps, samples = _steps(cfg, 16384, 1024)
    traj = dynamics.simulate_full(p, eq, f, T, steps, samples=samples)
    hom = diagnostics.homogeneity(traj, p)
    scales = derived_scales(p, w)
    report = {**hom.as_dict(),
              "meta": {**traj.meta,
                       "horizon_candidates": {
                           "beta_N": scales.t_horizon_bare,
                           "beta_N_over_drive_ratio": scales.t_horizon}}}
    write_json(out / "homogeneity_report.json", report, "homogeneity_report")
    if args.format == "binary":
        write_trajectory_binary(out / "trajectory.bin", traj)
    else:
        write_trajectory_csv(out / "trajectory.csv", traj)
    series = _homogeneity_series(traj, p)
    write_csv(out / "homogeneity.csv",
              ["t", "v_spread", "y_max", "density_err"],
              [series["t"], series["v_spread"], series["y_max"],
               series["density_err"]])
    plots.fig_homogeneity(series, p.mean_gap, out / "fig_homogeneity.png")
    return 0


def _homogeneity_series(traj, p):
    fam = diagnostics.window_family(p.L)
    t = traj.times
    v_spread = np.max(np.abs(traj.u), axis=1)
    y_max = np.max(np.abs(traj.y), axis=1)
    derr = np.empty(len(t))
    pos = traj.positions
    for i, row in enumerate(pos):
        xs = np.sort(np.mod(row, p.L))
        derr[i] = max(abs(diagnostics.window_counts(xs, lo, ln, p.L) / traj.N
                          - ln / p.L) for lo, ln in fam)
    return {"t": t, "v_spread": v_spread, "y_max": y_max, "density_err": derr}


def cmd_picard(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    eq = equilibrium.solve(p, f)
    T = resolve_horizon(cfg, p)
    steps, samples = _steps(cfg, 8192, 1024)
    pc = cfg.get("picard", {})
    tol = pc.get("tol", 1e-8)
    trials = pc.get("trials", 20)
    max_iter = pc.get("max_iter", 40)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)

    t = np.linspace(0.0, T, steps + 1)
    eta = picard.free_term(p, eq, f, t)
    state = picard.solve_fixed_point(p, eq, f, eta, tol=tol, max_iter=max_iter)
    gamma = 2.0 * picard.bt_norm(eta) if picard.bt_norm(eta) > 0 else 1.0
    probe = picard.contraction_probe(p, eq, f, t[::max(1, steps // 256)],
                                     gamma_ball=gamma, trials=trials, seed=seed)
    kern = picard.kernel_bounds(p, eq, f, t[::max(1, steps // samples)])
    report = {**state.as_dict(), "eta_norm": picard.bt_norm(eta),
              "probe": probe, "kernel_bounds": kern.as_dict()}
    write_json(out / "picard_report.json", report, "picard_report")
    write_csv(out / "picard_history.csv",
              ["iteration", "update_norm"],
              [np.arange(1, len(state.iterate_history) + 1),
               np.array(state.iterate_history)])
    write_modes_csv(out / "fixed_point_modes.csv", state.H,
                    stride=max(1, steps // samples))
    plots.fig_picard(state.iterate_history, probe["per_operator"],
                     out / "fig_picard.png")
    return 0


def cmd_verify(cfg, out: Path, args) -> int:
    p, f, w = _prepare(cfg)
    L0 = f.L0 if f.kind != "zero" else 0.0
    regime = check_conditions(p, w, L0=L0)
    eq = equilibrium.solve(p, f)
    eq_rep = equilibrium.verify(eq, p, f)

    T = resolve_horizon(cfg, p)
    steps, samples = _steps(cfg, 8192, 512)
    t = np.linspace(0.0, T, steps + 1)
    field, _, _ = spectral.linear_solution(p, eq, f, t)
    mode_rep = spectral.bound_suite(p, eq, f, field)
    kern = picard.kernel_bounds(p, eq, f, t[::max(1, steps // samples)])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    eta_norm = picard.bt_norm(field)
    gamma = 2.0 * eta_norm if eta_norm > 0 else 1.0
    probe = picard.contraction_probe(p, eq, f, t[::max(1, steps // 256)],
                                     gamma_ball=gamma,
                                     trials=cfg.get("picard", {}).get("trials", 20),
                                     seed=seed)
    traj = dynamics.simulate_full(p, eq, f, T, steps, samples=min(samples, steps))
    hom = diagnostics.homogeneity(traj, p)

    dash = diagnostics.bound_dashboard(regime=regime, equilibrium=eq_rep,
                                       mode_bounds=mode_rep, kernel=kern,
                                       probe=probe, homogeneity_report=hom)
    dash["envelope"] = spectral.zero_mode_envelope(field)
    write_json(out / "dashboard.json", dash, "dashboard")
    rows = dash["rows"]
    write_csv(out / "dashboard.csv", ["name", "lhs", "rhs", "kind", "status"],
              [[r["name"] for r in rows],
               [r.get("lhs", float("nan")) for r in rows],
               [r.get("rhs", float("nan")) for r in rows],
               [r["kind"] for r in rows],
               [r["status"] for r in rows]])
    plots.fig_dashboard(rows, out / "fig_dashboard.png")
    return 0


SWEEP_METRICS = {
    "verify": ("dashboard.json", ["regime_ok", "all_passed"]),
    "linear": ("linear_report.json", ["max_rel_linf_error", "y_scale"]),
    "equilibrium": ("equilibrium_report.json", ["residual_rel", "delta_max"]),
    "picard": ("picard_report.json", ["q_est", "residual"]),
    "simulate": ("homogeneity_report.json", ["v_spread_rel", "density_err", "y_max_over_delta"]),
    "regime": ("regime_report.json", ["all_satisfied"]),
}


def _sweep_one(packed):
    sub, cfg, outdir, fmt = packed
    args = argparse.Namespace(seed=cfg.get("seed"), format=fmt, jobs=1)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    COMMANDS[sub](cfg, out, args)
    return outdir


def cmd_sweep(cfg, out: Path, args) -> int:
    sw = cfg.get("sweep")
    if not sw:
        raise ConfigError("sweep subcommand needs a 'sweep' config section")
    if "exponents" not in cfg:
        raise ConfigError("sweep varies N, so the config must use 'exponents'")
    sub = sw.get("subcommand", "verify")
    Ns = sw["N"]
    tasks = []
    for N in Ns:
        sub_cfg = {k: v for k, v in cfg.items() if k != "sweep"}
        sub_cfg["exponents"] = {**cfg["exponents"], "N": int(N)}
        tasks.append((sub, sub_cfg, str(out / f"N={N}"), args.format))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_sweep_one, tasks))
    else:
        for task in tasks:
            _sweep_one(task)

    report_name, keys = SWEEP_METRICS[sub]
    table = {k: [] for k in keys}
    for N in Ns:
        data = json.loads((out / f"N={N}" / report_name).read_text())
        for k in keys:
            v = data.get(k)
            table[k].append(float(v) if isinstance(v, (int, float, bool)) else float("nan"))
    write_csv(out / "sweep_summary.csv", ["N"] + keys,
              [np.asarray(Ns)] + [np.asarray(table[k]) for k in keys])
    numeric = {k: v for k, v in table.items()
               if all(np.isfinite(v)) and not set(v) <= {0.0, 1.0}}
    if numeric:
        plots.fig_sweep(Ns, numeric, out / "fig_sweep.png")
    return 0


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "linear": cmd_linear,
    "picard": cmd_picard,
    "regime": cmd_regime,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ringflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory "
                        f"(default ${DEFAULT_OUT_ENV} or ./ringflow_out)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep runs")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the probe seed from the config")
    parser.add_argument("--format", choices=["csv", "binary"], default="csv",
                        help="trajectory artifact format")
    args = parser.parse_args(argv)

    out = Path(args.out or os.environ.get(DEFAULT_OUT_ENV, "ringflow_out"))
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.subcommand](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (equilibrium.SolverError, dynamics.GapCollapseError,
            picard.NonContractionError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "error.json",
                   {"error": type(exc).__name__, "message": str(exc)})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
