"""Figures for the CLI report path.  Every function writes one PNG and
returns its path; the Agg backend keeps this headless."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes reproducible
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return str(path)


def plot_spectrum(lambdas, path, title="interval spectrum"):
    lambdas = np.asarray(lambdas, dtype=float)
    j = np.arange(1, lambdas.size + 1)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(j, lambdas, "o-")
    ax.set_xlabel("mode j")
    ax.set_ylabel(r"$\lambda_j$")
    ax.set_title(title)
    return _save(fig, path)


def plot_ratio_table(rows, path):
    """Largest ratio per estimate, with the largest refinement drift."""
    by_est = {}
    for r in rows:
        ratio = r["ratio"]
        if ratio is None or not math.isfinite(ratio):
            continue
        cur = by_est.setdefault(r["estimate"], [0.0, 0.0])
        cur[0] = max(cur[0], ratio)
        d = r.get("drift")
        if d is not None and math.isfinite(d):
            cur[1] = max(cur[1], d)
    names = sorted(by_est)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.8))
    a1.barh(names, [by_est[n][0] for n in names])
    a1.set_xlabel("max ratio")
    a2.barh(names, [max(by_est[n][1], 1e-17) for n in names])
    a2.set_xscale("log")
    a2.set_xlabel("max refinement drift")
    a2.set_yticklabels([])
    return _save(fig, path)


def plot_decay(fits, path):
    """Log-log series with the fitted power laws over each window."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for name, fit in fits.items():
        t, v = np.asarray(fit.t), np.asarray(fit.values)
        keep = (t > 0) & (v > 0)
        if not np.any(keep):
            continue
        (line,) = ax.loglog(t[keep], v[keep], lw=1, label=f"{name}: {fit.slope:.3f}")
        if math.isfinite(fit.slope):
            tw = np.geomspace(*fit.window, 20)
            ax.loglog(tw, np.exp(fit.intercept) * tw**fit.slope, "--", color=line.get_color(), lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("sup norm")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_lifespan(fits, path):
    """log T against 1/eps with the least-squares line, one set per resolution."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for fit in fits:
        pts = [p for p in fit.points if not p["censored"]]
        x = np.array([1.0 / p["eps"] for p in pts])
        y = np.log([p["T"] for p in pts])
        (line,) = ax.plot(x, y, "o", label=f"dr={fit.resolution:g}: kappa={fit.kappa:.4f}, r2={fit.r2:.4f}")
        xs = np.linspace(x.min(), x.max(), 20)
        ax.plot(xs, fit.kappa * xs + fit.intercept, "-", color=line.get_color(), lw=1)
    ax.set_xlabel(r"$1/\varepsilon$")
    ax.set_ylabel(r"$\log T(\varepsilon)$")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_picard(A, path):
    """A_k against k for each word length."""
    A = np.asarray(A, dtype=float)
    k = np.arange(1, A.shape[0] + 1)
    fig, ax = plt.subplots(figsize=(5, 3.8))
    for L in range(A.shape[1]):
        ax.semilogy(k, np.maximum(A[:, L], 1e-300), "o-", label=f"word length <= {L}")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$A_k$")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_energy(times, drift, path):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.semilogy(times, np.maximum(np.asarray(drift, dtype=float), 1e-18))
    ax.set_xlabel("t")
    ax.set_ylabel("relative energy drift")
    return _save(fig, path)


def plot_series(series, path, xlabel="t", ylabel="", logy=False):
    """Several (label, x, y) curves on one axis."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, x, y in series:
        (ax.semilogy if logy else ax.plot)(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_compat(rows, path):
    """Largest sampled boundary violation per nonlinearity, coloured by verdict."""
    names = [r["nl"] for r in rows]
    vals = [max(float(r["max_violation"]), 1e-17) for r in rows]
    colors = ["tab:green" if r["compatible"] else "tab:red" for r in rows]
    fig, ax = plt.subplots(figsize=(6, 0.5 * len(rows) + 1.5))
    ax.barh(names, vals, color=colors)
    ax.set_xscale("log")
    ax.set_xlabel("max boundary violation (green: compatible)")
    return _save(fig, path)
