"""Command-line entry point.

    waveguide <command> [--config FILE] [--set section.key=value ...]
                        [--out DIR] [--threads N] [--no-plots]

Commands: spectrum, verify, evolve, decay, lifespan, picard, compat.  Each
writes CSV and JSON (and, unless disabled, PNG figures plus two-column
plot-data files) into ``<out>/<command>/``.  Exit status: 0 when every
check passes, 1 when a check fails (the failing rows are printed), 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import report as rp
from .config import ConfigError, RunConfig, load_config

COMMANDS = {
    "spectrum": "eigenvalues, Gram matrix, Plancherel and Weyl checks of the base interval",
    "verify": "weighted inequality suite over the field corpus plus the ODE comparison bound",
    "evolve": "one evolution; snapshot dump, sup-norm series, energy and commutation checks",
    "decay": "decay rates of the zero mode and the Klein-Gordon mode",
    "lifespan": "John-model blowup sweep and the fit log T = kappa/eps + c at two resolutions",
    "picard": "Picard iterates, contraction of A_k and agreement with direct evolution",
    "compat": "Neumann compatibility checker: random agreement test and canonical examples",
}


@dataclass
class Outcome:
    checks: dict = field(default_factory=dict)  # name -> bool
    failing: dict = field(default_factory=dict)  # name -> report row
    summary: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def check(self, name: str, ok: bool, row=None):
        self.checks[name] = bool(ok)
        if not ok:
            self.failing[name] = row if row is not None else {}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


class Context:
    def __init__(self, cfg: RunConfig, out_dir: str, threads: int, plots: bool):
        self.cfg = cfg
        self.out = rp.ensure_dir(out_dir)
        self.threads = threads
        self.plots = plots
        self.hash = cfg.hash

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def csv(self, name, rows, columns, outcome: Outcome):
        outcome.artifacts.append(rp.write_csv(self.path(name), rows, columns, self.hash))

    def series(self, name, x, y, header, outcome: Outcome):
        if self.plots:
            outcome.artifacts.append(rp.write_series(self.path(name), x, y, self.hash, header))

    def figure(self, func, name, *args, outcome: Outcome, **kw):
        if self.plots:
            outcome.artifacts.append(func(*args, self.path(name), **kw))


# spectrum


def cmd_spectrum(ctx: Context) -> Outcome:
    from .spectral import YGrid, gram_matrix, plancherel_defect, reconstruct, weyl_check

    cfg, out = ctx.cfg, Outcome()
    spec = cfg.spectrum
    grid = YGrid.for_spectrum(spec)
    L = spec.base.length
    exact = spec.wavenumbers * math.pi / L
    rows = [{"j": j + 1, "lambda": spec.lambdas[j], "norm_constant": spec.norm_constants[j],
             "closed_form": exact[j]} for j in range(spec.J)]
    ctx.csv("spectrum.csv", rows, ["j", "lambda", "norm_constant", "closed_form"], out)
    gram = float(np.abs(gram_matrix(spec, grid) - np.eye(spec.J)).max())
    rng = np.random.default_rng(cfg.seed)
    h = reconstruct(rng.normal(size=spec.J), spec, grid)
    defect = plancherel_defect(h, spec, grid)
    eig_err = float(np.abs(spec.lambdas - exact).max())
    out.summary = {"J": spec.J, "bc": spec.bc.value, "length": L, "gram_defect": gram, "plancherel_defect": defect,
                   "eigenvalue_error": eig_err, "y_points": len(grid)}
    out.check("eigenvalues equal k pi / L", eig_err <= 1e-14 * max(1.0, float(exact.max())),
              {"max_error": eig_err})
    out.check("Gram matrix is the identity", gram <= 1e-10, {"gram_defect": gram})
    out.check("Plancherel defect of a band-limited field", defect <= 1e-10, {"defect": defect})
    if spec.J >= 3:
        w = weyl_check(spec)
        out.summary["weyl"] = w
        out.check("Weyl law", w["max_deviation"] <= 1e-14, w)
    ctx.series("spectrum.dat", np.arange(1, spec.J + 1), spec.lambdas, ("j", "lambda"), out)
    from .plotting import plot_spectrum

    ctx.figure(plot_spectrum, "spectrum.png", spec.lambdas, outcome=out)
    return out


# verify


def _verify_chunk(args):
    from .fields import corpus
    from .inequalities import verify_suite

    indices, t, max_drift, ratio_max, with_ode = args
    allf = corpus()
    res = verify_suite([allf[i] for i in indices], times=(t,), max_drift=max_drift, ratio_max=ratio_max)
    rows = res["rows"] if with_ode else [r for r in res["rows"] if r["estimate"] != "ode_lemma"]
    return rows


def corpus_indices(n_total: int, size: int, seed: int) -> list:
    """All fields, or a seeded sample of ``size`` of them in corpus order."""
    if size == 0 or size >= n_total:
        return list(range(n_total))
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n_total, size=size, replace=False))


def cmd_verify(ctx: Context) -> Outcome:
    from .fields import corpus

    cfg, out = ctx.cfg, Outcome()
    ex = cfg.experiment
    n_total = len(corpus())
    idx = corpus_indices(n_total, ex["corpus_size"], cfg.seed)
    workers = max(1, min(ctx.threads, len(idx)))
    chunks = [idx[i::workers] for i in range(workers)]
    jobs = [(c, ex["verify_t"], ex["drift_max"], ex["ratio_max"], k == 0) for k, c in enumerate(chunks)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_verify_chunk, jobs))
    else:
        parts = [_verify_chunk(j) for j in jobs]
    names = [f.name for f in corpus()]
    # merge deterministically: fields in corpus order, then the ODE rows
    by_field = {}
    ode_rows = []
    for chunk, part in zip(chunks, parts):
        field_part = [r for r in part if r["estimate"] != "ode_lemma"]
        ode_rows.extend(r for r in part if r["estimate"] == "ode_lemma")
        per = len(field_part) // max(len(chunk), 1)
        for k, i in enumerate(chunk):
            by_field[i] = field_part[k * per : (k + 1) * per]
            for r in by_field[i]:
                r["index"] = i
    field_rows = [r for i in idx for r in by_field[i]]
    rows = field_rows + ode_rows
    cols = ["estimate", "index", "field", "word", "t", "ratio", "rhs_floor", "drift", "samples", "flags",
            "passed"]
    ctx.csv("ratios.csv", rows, cols, out)
    drifts = [r["drift"] for r in field_rows if math.isfinite(r["drift"])]
    out.summary = {
        "fields": [names[i] for i in idx],
        "n_fields": len(idx),
        "t": ex["verify_t"],
        "max_drift": max(drifts) if drifts else math.nan,
        "max_ratio": max((r["ratio"] for r in field_rows if math.isfinite(r["ratio"])), default=math.nan),
        "max_ode_ratio": max((r["ratio"] for r in ode_rows), default=math.nan),
        "rows": len(rows),
    }
    for r in rows:
        where = f"field {r['index']} ({r['field']})" if "index" in r else r["field"]
        name = f"{r['estimate']} on {where}" + (f" word {r['word']}" if r["word"] else "")
        out.check(name, r["passed"], r)
    from .plotting import plot_ratio_table

    ctx.figure(plot_ratio_table, "ratios.png", rows, outcome=out)
    return out


# evolve


def cmd_evolve(ctx: Context) -> Outcome:
    from .evolution import CompatibilityRefused, evolve, write_snapshots
    from .evolution.diagnostics import commutation_run, dirichlet_trick_check
    from .spectral import BC

    cfg, out = ctx.cfg, Outcome()
    ex = cfg.experiment
    spec = cfg.spectrum
    nl = cfg.nonlinearity
    times = list(np.arange(0.0, cfg.T + 1e-9, cfg.output_every))
    commutation = None
    try:
        if nl.is_zero:
            commutation, res = commutation_run(cfg.data, spec, cfg.T, dr=cfg.dr, cfl=cfg.cfl,
                                               tolerance=ex["commutation_tol"], output_every=cfg.output_every,
                                               extra_times=times, n_y=cfg.y_points or 1025)
        else:
            res = evolve(cfg.data, nl, cfg.T, spec, dr=cfg.dr, cfl=cfg.cfl, output_every=cfg.output_every,
                         snapshot_times=times, theta=ex["theta"])
    except CompatibilityRefused as exc:
        out.check("nonlinearity accepted by the compatibility gate", False, {"nl": nl.name, "refusal": str(exc)})
        out.summary = {"nl": nl.name, "refused": str(exc)}
        return out
    out_times = {round(t / res.meta["dt"]) for t in times}
    snaps = [s for s in res.snapshots if round(s.t / res.meta["dt"]) in out_times]
    meta = dict(res.meta, config_sha256=ctx.hash)
    n_rec = write_snapshots(ctx.path("snapshots.bin"), snaps, meta)
    out.artifacts.append(ctx.path("snapshots.bin"))
    led = res.ledger.as_arrays()
    rows = []
    for i, t in enumerate(res.times):
        row = {"t": t, "sup_dtx": res.sup_dtx[i], "sup_dt": res.sup_dt[i], "sup_dy": res.sup_dy[i],
               "energy": led["energy"][i], "forcing_integral": led["forcing_integral"][i]}
        for j in range(spec.J):
            row[f"mode_sup_{j + 1}"] = res.mode_sup[i, j]
        rows.append(row)
    cols = ["t", "sup_dtx", "sup_dt", "sup_dy", "energy", "forcing_integral"] + [f"mode_sup_{j + 1}"
                                                                                 for j in range(spec.J)]
    ctx.csv("series.csv", rows, cols, out)
    E = led["energy"]
    drift = np.abs(E - E[0]) / E[0] if E[0] > 0 else np.zeros_like(E)
    out.summary = {"meta": res.meta, "blowup": res.blowup, "snapshot_records": n_rec,
                   "max_energy_drift": float(drift.max())}
    if nl.is_zero:
        out.check(f"energy drift <= {ex['energy_drift_max']:g}", drift.max() <= ex["energy_drift_max"],
                  {"drift": float(drift.max()), "dr": cfg.dr, "cfl": cfg.cfl})
        c = commutation
        out.summary["commutation"] = {"residual": c.residual, "scale": c.scale, "relative": c.relative,
                                      "per_mode": c.per_mode, "times": c.times, "n_y": c.n_y}
        out.check(f"mode commutation relative residual <= {c.tolerance:g}", c.passed,
                  {"relative": c.relative, "per_mode": c.per_mode})
        if spec.bc == BC.NEUMANN and spec.J >= 2:
            d = dirichlet_trick_check(res.final.U, spec)
            out.summary["dirichlet"] = {"endpoint_max": d.endpoint_max, "reconstruction_error":
                                        d.reconstruction_error, "scale": d.scale}
            out.check("d_y u vanishes at the endpoints", d.passed, out.summary["dirichlet"])
    ctx.series("sup_dtx.dat", res.times, res.sup_dtx, ("t", "sup_dtx"), out)
    ctx.series("energy.dat", res.times, E, ("t", "energy"), out)
    from .plotting import plot_series

    ctx.figure(plot_series, "sup_norms.png",
               [("sup|d_{t,x} u|", res.times, res.sup_dtx), ("sup|d_y u|", res.times, res.sup_dy)]
               + [(f"mode {j + 1}", res.times, res.mode_sup[:, j]) for j in range(spec.J)],
               outcome=out, logy=True, ylabel="sup norm")
    return out


# decay


def cmd_decay(ctx: Context) -> Outcome:
    from .experiments import decay_experiment

    cfg, out = ctx.cfg, Outcome()
    window = tuple(cfg.experiment["window"])
    res = decay_experiment(T=window[1], dr=cfg.dr, cfl=cfg.cfl, J=max(cfg.J, 2), B=cfg.data.B, window=window,
                           output_every=min(cfg.output_every, 1.0))
    rows = []
    for name, fit in res["fits"].items():
        rows.append({"fit": name, "label": fit.label, "slope": fit.slope, "slope_ci": fit.slope_ci,
                     "expected": fit.expected, "window_lo": fit.window[0], "window_hi": fit.window[1],
                     "n_points": fit.n_points, "flags": ";".join(fit.flags)})
        ctx.series(f"decay_{name}.dat", fit.t, fit.values, ("t", fit.label.replace(" ", "_")), out)
    ctx.csv("decay.csv", rows, ["fit", "label", "slope", "slope_ci", "expected", "window_lo", "window_hi",
                                "n_points", "flags"], out)
    out.summary = {"fits": {k: f.summary() for k, f in res["fits"].items()}, "params": res["params"]}
    by_name = {r["fit"]: r for r in rows}
    for name, ok in res["checks"].items():
        out.check(name, ok, by_name.get(name, by_name.get("mixed_dy") if name == "dy_at_least_wave" else None))
    from .plotting import plot_decay

    ctx.figure(plot_decay, "decay.png", res["fits"], outcome=out)
    return out


# lifespan


def cmd_lifespan(ctx: Context) -> Outcome:
    from .experiments import lifespan_refinement

    cfg, out = ctx.cfg, Outcome()
    ex = cfg.experiment
    res = lifespan_refinement(ex["eps_list"], drs=tuple(ex["resolutions"]), workers=ctx.threads,
                              r2_min=ex["r2_min"], kappa_tol=ex["kappa_tol"], cfl=cfg.cfl, T_budget=ex["T_budget"],
                              theta=ex["theta"], rtol=ex["rtol"])
    rows = []
    for fit in res["fits"]:
        for p in fit.points:
            br = p.get("bracket") or [math.nan, math.nan]
            cb = p.get("coarse_bracket") or [math.nan, math.nan]
            rows.append({"resolution": fit.resolution, "eps": p["eps"], "T": p["T"], "width": p["width"],
                         "bracket_lo": br[0], "bracket_hi": br[1], "coarse_lo": cb[0], "coarse_hi": cb[1],
                         "confirmed": p["confirmed"], "overlap": p.get("overlap", False), "censored": p["censored"]})
        good = [p for p in fit.points if not p["censored"]]
        ctx.series(f"lifespan_dr{fit.resolution:g}.dat", [1.0 / p["eps"] for p in good],
                   np.log([p["T"] for p in good]), ("inv_eps", "log_T"), out)
    ctx.csv("lifespan.csv", rows, ["resolution", "eps", "T", "width", "bracket_lo", "bracket_hi", "coarse_lo",
                                   "coarse_hi", "confirmed", "overlap", "censored"], out)
    out.summary = {"fits": [f.summary() for f in res["fits"]], "kappa": res["kappa"],
                   "kappa_rel_change": res["kappa_rel_change"], "r2": [f.r2 for f in res["fits"]]}
    for name, ok in res["checks"].items():
        out.check(name, ok, {"kappa": res["kappa"], "kappa_rel_change": res["kappa_rel_change"],
                             "r2": [f.r2 for f in res["fits"]]})
    from .plotting import plot_lifespan

    ctx.figure(plot_lifespan, "lifespan.png", res["fits"], outcome=out)
    return out


# picard


def cmd_picard(ctx: Context) -> Outcome:
    from .evolution.picard import picard_vs_direct

    cfg, out = ctx.cfg, Outcome()
    ex = cfg.experiment
    res = picard_vs_direct(cfg.data, cfg.nonlinearity, cfg.T, cfg.spectrum, k_max=ex["k_max"], dr=cfg.dr,
                           cfl=cfg.cfl, max_len=ex["max_len"])
    pic = res["picard"]
    K, n_len = pic.A.shape
    rows = []
    for k in range(K):
        row = {"k": k + 1}
        for L in range(n_len):
            row[f"M_len{L}"] = pic.M[k, L]
            row[f"A_len{L}"] = pic.A[k, L]
            row[f"ratio_len{L}"] = res["contraction"][L][k - 1] if k >= 1 else math.nan
        rows.append(row)
    cols = ["k"] + [f"{q}_len{L}" for L in range(n_len) for q in ("M", "A", "ratio")]
    ctx.csv("picard.csv", rows, cols, out)
    out.summary = {"difference": res["difference"], "scheme_error": res["scheme_error"], "ratio": res["ratio"],
                   "scale": res["scale"], "contraction": res["contraction"], "meta": pic.meta}
    cmax = ex["contraction_max"]
    for L in range(n_len):
        for k, r in enumerate(res["contraction"][L], start=2):
            # A_{k-1} = 0 means the iteration has already converged exactly
            ok = (not math.isfinite(r) and pic.A[k - 2, L] == 0.0) or r <= cmax
            out.check(f"A_{k}/A_{k - 1} <= {cmax:g} (word length {L})", ok, rows[k - 1])
    out.check(f"Picard limit within {ex['agreement_max']:g}x scheme error of direct evolution",
              res["ratio"] <= ex["agreement_max"],
              {"difference": res["difference"], "scheme_error": res["scheme_error"], "ratio": res["ratio"]})
    for L in range(n_len):
        ctx.series(f"A_len{L}.dat", np.arange(1, K + 1), pic.A[:, L], ("k", f"A_len{L}"), out)
    from .plotting import plot_picard

    ctx.figure(plot_picard, "picard.png", pic.A, outcome=out)
    return out


# compat

CANONICAL_EXPECTED = {"quasi_x": True, "quasi_dt_dtdy": False, "quasi_dt_dyy": True}


def cmd_compat(ctx: Context) -> Outcome:
    from .evolution import canonical_examples, check_neumann_compatibility, compatibility_agreement

    cfg, out = ctx.cfg, Outcome()
    ex = cfg.experiment
    agree = compatibility_agreement(ex["compat_sets"], seed=cfg.seed)
    out.check("closed form agrees with sampling on random sets", agree["disagreements"] == 0, agree)
    rows = []
    for name, rep in canonical_examples().items():
        row = {"nl": name, "expected": CANONICAL_EXPECTED[name], "compatible": rep.compatible,
               "closed_form": rep.closed_form, "sampled": rep.sampled, "max_violation": rep.max_violation}
        rows.append(row)
        out.check(f"canonical {name}", rep.compatible == CANONICAL_EXPECTED[name] and rep.agree, row)
    own = check_neumann_compatibility(cfg.nonlinearity, seed=cfg.seed)
    own_row = {"nl": cfg.nonlinearity.name, "expected": None, "compatible": own.compatible,
               "closed_form": own.closed_form, "sampled": own.sampled, "max_violation": own.max_violation}
    rows.append(own_row)
    out.check("configured nonlinearity: both routes agree", own.agree, own_row)
    ctx.csv("compat.csv", rows, ["nl", "expected", "compatible", "closed_form", "sampled", "max_violation"], out)
    from .plotting import plot_compat

    ctx.figure(plot_compat, "compat.png", rows, outcome=out)
    out.summary = {"agreement": agree, "canonical": rows[:-1], "configured": own_row,
                   "configured_witnesses": own.witnesses}
    if ex["regimes"]:
        from .experiments import theorem_regimes_report

        reg = theorem_regimes_report(T=cfg.T, dr=cfg.dr, cfl=cfg.cfl)
        cols = ["nl", "family", "compatible", "status", "t_end", "weighted_sup_max", "vs_linear", "bounded",
                "detail"]
        ctx.csv("regimes.csv", reg["rows"], cols, out)
        out.summary["regimes"] = reg
        for r in reg["rows"]:
            ok = r["status"] == "refused" if not r["compatible"] else (r["status"] == "survived" and r["bounded"])
            out.check(f"regime {r['nl']}", ok, r)
    return out


RUNNERS = {
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "evolve": cmd_evolve,
    "decay": cmd_decay,
    "lifespan": cmd_lifespan,
    "picard": cmd_picard,
    "compat": cmd_compat,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="INI configuration file (defaults apply without one)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value; repeatable")
    common.add_argument("--out", metavar="DIR", help="output root, replacing [output] directory")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes for sweeps")
    common.add_argument("--no-plots", action="store_true", help="skip figures and plot-data files")
    p = argparse.ArgumentParser(prog="waveguide", description="Numerical laboratory for wave equations on "
                                                               "R^3 x [a, b].")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def _fmt_row(row) -> str:
    if not isinstance(row, dict):
        return str(row)
    return ", ".join(f"{k}={rp.fmt(v) if isinstance(v, float) else v}" for k, v in row.items()
                     if not str(k).startswith("_"))


def run(command: str, cfg: RunConfig, out_root: str | None = None, threads: int = 1, plots: bool = True,
        stream=None) -> tuple[int, Outcome]:
    stream = stream or sys.stdout
    if command not in RUNNERS:
        raise ValueError(f"unknown command {command!r}")
    ctx = Context(cfg, os.path.join(out_root or cfg.output_dir, command), threads, plots and cfg.plots)
    outcome = RUNNERS[command](ctx)
    payload = {"command": command, "passed": outcome.passed, "checks": outcome.checks, "summary": outcome.summary,
               "failing": outcome.failing}
    rp.write_json(ctx.path(f"{command}.json"), command, payload, cfg.echo())
    n_ok = sum(outcome.checks.values())
    print(f"{command}: {n_ok}/{len(outcome.checks)} checks passed -> {ctx.out}", file=stream)
    for name, row in outcome.failing.items():
        print(f"FAILED {name}: {_fmt_row(row)}", file=stream)
    return (0 if outcome.passed else 1), outcome


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    code, _ = run(args.command, cfg, args.out, args.threads, not args.no_plots)
    return code


if __name__ == "__main__":
    sys.exit(main())
