"""Figure rendering for the report pipelines.

All figures are written straight to files (Agg backend) next to the CSV
they visualize; nothing interactive.  Metadata is stripped so identical
runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 110
_SAVE_KW = {"dpi": DPI, "metadata": {"Software": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return str(path)


def fig_equilibrium(eq, p, f, path):
    from .forcefield import force_eval

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6))
    k = np.arange(1, eq.N + 1)
    ax1.plot(k, eq.deltas, lw=0.9, color="tab:blue")
    ax1.set_xlabel("particle index k")
    ax1.set_ylabel("gap deviation $\\delta_k$")
    ax1.set_title(f"gap profile, N={eq.N}")
    ax1.grid(alpha=0.3)

    xs = np.linspace(0.0, p.L, 2001)
    ax2.plot(xs, force_eval(f, xs), color="tab:red", lw=1.2, label="drive F(x)")
    ax2.plot(np.mod(eq.x0, p.L), np.zeros_like(eq.x0), "|", color="k",
             ms=8, label="particles")
    ax2.set_xlabel("x")
    ax2.set_ylabel("F")
    ax2.legend(loc="upper right", fontsize=8)
    ax2.grid(alpha=0.3)
    return _finish(fig, path)


def fig_linear(times, abs_err, y_scale, ratios, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    err = np.maximum(abs_err / max(y_scale, 1e-300), 1e-20)
    ax1.semilogy(times, err, lw=0.9)
    ax1.set_xlabel("t")
    ax1.set_ylabel("relative deviation mismatch")
    ax1.set_title("analytic vs direct integration")
    ax1.grid(alpha=0.3, which="both")

    n = np.arange(1, len(ratios))
    ax2.semilogy(n, np.maximum(ratios[1:], 1e-300), ".", ms=4)
    ax2.set_xlabel("mode n")
    ax2.set_ylabel("folded-n amplitude ratio")
    ax2.set_title("mode decay profile")
    ax2.grid(alpha=0.3, which="both")
    return _finish(fig, path)


def fig_picard(history, per_operator, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.semilogy(np.arange(1, len(history) + 1),
                 np.maximum(history, 1e-300), "o-", ms=4)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("update norm")
    ax1.set_title("fixed-point convergence")
    ax1.grid(alpha=0.3, which="both")

    keys = list(per_operator)
    vals = [max(per_operator[k], 1e-300) for k in keys]
    ax2.bar(keys, vals, color="tab:orange")
    ax2.set_yscale("log")
    ax2.set_ylabel("measured contraction ratio")
    ax2.set_title("per-operator probe")
    ax2.grid(alpha=0.3, axis="y", which="both")
    return _finish(fig, path)


def fig_homogeneity(series, delta, path):
    fig, axes = plt.subplots(3, 1, figsize=(7, 7.5), sharex=True)
    t = series["t"]
    axes[0].plot(t, series["v_spread"], lw=0.8)
    axes[0].axhline(delta, color="tab:red", ls="--", lw=0.8, label="window half-width")
    axes[0].set_ylabel("max |v - V|")
    axes[0].legend(fontsize=8)
    axes[1].plot(t, series["y_max"] / delta, lw=0.8)
    axes[1].axhline(1.0, color="tab:red", ls="--", lw=0.8)
    axes[1].set_ylabel("max |y| / gap")
    axes[2].plot(t, series["density_err"], lw=0.8)
    axes[2].set_ylabel("density error")
    axes[2].set_xlabel("t")
    for ax in axes:
        ax.grid(alpha=0.3)
    return _finish(fig, path)


def fig_regime(entries, path):
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(entries) + 1.5))
    names = [e["name"] for e in entries]
    margins = [max(e["margin"], 1e-300) if isinstance(e["margin"], (int, float))
               else 1e300 for e in entries]
    colors = ["tab:green" if e["satisfied"] else "tab:red" for e in entries]
    ax.barh(names, margins, color=colors)
    ax.axvline(1.0, color="k", lw=1.0)
    ax.set_xscale("log")
    ax.set_xlabel("margin (satisfied iff < 1)")
    return _finish(fig, path)


def fig_dashboard(rows, path):
    fig, ax = plt.subplots(figsize=(8, 0.32 * len(rows) + 1.5))
    names = [r["name"] for r in rows]
    color_of = {"pass": "tab:green", "fail": "tab:red",
                "stable": "tab:blue", "not_applicable": "lightgray"}
    vals = []
    for r in rows:
        lhs, rhs = r.get("lhs"), r.get("rhs")
        if isinstance(lhs, (int, float)) and isinstance(rhs, (int, float)) \
                and rhs not in (0,) and np.isfinite(rhs) and np.isfinite(lhs) and rhs > 0:
            vals.append(max(lhs / rhs, 1e-300))
        else:
            vals.append(1e-300)
    ax.barh(names, vals, color=[color_of[r["status"]] for r in rows])
    ax.axvline(1.0, color="k", lw=1.0)
    ax.set_xscale("log")
    ax.set_xlabel("measured / bound")
    ax.tick_params(labelsize=7)
    return _finish(fig, path)


def fig_sweep(Ns, metrics, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in metrics.items():
        vals = np.asarray(vals, dtype=float)
        if np.all(np.isfinite(vals)) and np.all(vals > 0):
            ax.loglog(Ns, vals, "o-", label=name)
        else:
            ax.plot(Ns, vals, "o-", label=name)
    ax.set_xlabel("N")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    return _finish(fig, path)
