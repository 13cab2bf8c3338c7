"""Headline experiments: decay rates of the zero mode and the Klein-Gordon
modes, the lifespan law for the John model, the decay of d_y u, and the
survival report across families of nonlinearities.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import BaseInterval, build_spectrum
from .evolution import (
    CompatibilityRefused,
    InitialData,
    Nonlinearity,
    check_neumann_compatibility,
    evolve,
    find_blowup,
    preset,
)

DECAY_WINDOW = (20.0, 200.0)
WAVE_BAND = (-1.15, -0.85)
KG_BAND = (-1.65, -1.35)
CI_Z = 2.0


class InsufficientWindow(ValueError):
    """The fit window is shorter than a decade or holds too few points."""


class CensoredSweep(RuntimeError):
    """More than one sweep point failed to blow up within the time budget."""


# decay fits


@dataclass
class DecayFit:
    t: np.ndarray
    values: np.ndarray
    window: tuple
    slope: float
    slope_ci: float  # least-squares standard error of the slope
    intercept: float
    expected: float
    n_points: int
    label: str = ""
    flags: list = field(default_factory=list)

    def within(self, band, z: float = CI_Z) -> bool:
        """Slope inside ``band`` after widening it by z standard errors."""
        lo, hi = band
        return lo - z * self.slope_ci <= self.slope <= hi + z * self.slope_ci

    @property
    def degenerate(self) -> bool:
        return "degenerate" in self.flags

    def summary(self) -> dict:
        return {"label": self.label, "window": list(self.window), "slope": self.slope, "slope_ci": self.slope_ci,
                "intercept": self.intercept, "expected": self.expected, "n_points": self.n_points,
                "flags": list(self.flags)}


def fit_decay(t, values, window=DECAY_WINDOW, expected: float = math.nan, label: str = "",
              min_points: int = 10) -> DecayFit:
    """Least-squares fit of log(values) against log(t) on ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = window
    if not hi >= 10 * lo:
        raise InsufficientWindow(f"window [{lo}, {hi}] is shorter than one decade")
    if t.size == 0 or t.min() > lo + 1e-9 or t.max() < hi - 1e-9:
        raise InsufficientWindow(f"series covers [{t.min() if t.size else 'nan'}, {t.max() if t.size else 'nan'}], "
                                 f"window is [{lo}, {hi}]")
    m = (t >= lo) & (t <= hi)
    if np.all(v[m] == 0.0):
        return DecayFit(t, v, (lo, hi), math.nan, math.nan, math.nan, expected, int(m.sum()), label, ["degenerate"])
    m &= v > 0
    if m.sum() < min_points:
        raise InsufficientWindow(f"only {int(m.sum())} positive samples in the window")
    x, y = np.log(t[m]), np.log(v[m])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(n - 2, 1)
    se = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return DecayFit(t, v, (lo, hi), float(coef[0]), se, float(coef[1]), expected, n, label)


def measure_mode_decay(result, j: int, window=DECAY_WINDOW) -> DecayFit:
    """Zero mode (j = 1): sup|d u_1|, expected slope -1.  Modes j >= 2:
    sup|u_j|, expected slope -3/2 when lambda_j > 0."""
    if j == 1 and result.meta.get("bc", "neumann") == "neumann":
        return fit_decay(result.times, result.mode_grad_sup[:, 0], window, -1.0, "mode 1 sup|du|")
    return fit_decay(result.times, result.mode_sup[:, j - 1], window, -1.5, f"mode {j} sup|u|")


def dy_decay_check(result, window=DECAY_WINDOW) -> DecayFit:
    """sup|d_y u| decays at least like 1/t: it has no zero-mode part."""
    fit = fit_decay(result.times, result.sup_dy, window, -1.0, "sup|d_y u|")
    if np.max(np.abs(result.sup_dy)) == 0.0 and "degenerate" not in fit.flags:
        fit.flags.append("degenerate")
    return fit


def decay_experiment(T: float = 200.0, dr: float = 0.1, cfl: float = 0.5, J: int = 3, B: float = 2.0,
                     window=DECAY_WINDOW, output_every: float = 1.0) -> dict:
    """Three linear Neumann runs on [0, pi]: zero mode only, mode 2 only, and
    both together.  The mixed run must reproduce both channels."""
    spec = build_spectrum(BaseInterval(0.0, math.pi), J)
    runs = {
        "zero_mode": InitialData(eps=1.0, B=B, f_modes={1: 1.0}),
        "mode2": InitialData(eps=1.0, B=B, f_modes={2: 1.0}),
        "mixed": InitialData(eps=1.0, B=B, f_modes={1: 1.0, 2: 1.0}),
    }
    results = {k: evolve(d, preset("zero"), T, spec, dr=dr, cfl=cfl, output_every=output_every)
               for k, d in runs.items()}
    fits = {
        "zero_mode": measure_mode_decay(results["zero_mode"], 1, window),
        "mode2": measure_mode_decay(results["mode2"], 2, window),
        "mixed_zero_mode": measure_mode_decay(results["mixed"], 1, window),
        "mixed_mode2": measure_mode_decay(results["mixed"], 2, window),
        "mixed_dy": dy_decay_check(results["mixed"], window),
    }
    checks = {
        "zero_mode": fits["zero_mode"].within(WAVE_BAND),
        "mode2": fits["mode2"].within(KG_BAND),
        "mixed_zero_mode": fits["mixed_zero_mode"].within(WAVE_BAND),
        "mixed_mode2": fits["mixed_mode2"].within(KG_BAND),
        "decoupled": abs(fits["mixed_zero_mode"].slope - fits["zero_mode"].slope)
        <= CI_Z * (fits["mixed_zero_mode"].slope_ci + fits["zero_mode"].slope_ci) + 1e-9,
        "dy_at_least_wave": fits["mixed_dy"].slope <= -0.85 + CI_Z * fits["mixed_dy"].slope_ci,
    }
    return {"fits": fits, "checks": checks, "results": results, "passed": all(checks.values()),
            "params": {"T": T, "dr": dr, "cfl": cfl, "J": J, "B": B, "window": list(window)}}


# lifespan


def john_data(eps: float, B: float = 7.0, width: float = 2.0, m: int = 4) -> InitialData:
    """Outgoing shell data for the lifespan sweep.

    r u = F(r - t) for the free wave, so the solution never refocuses at the
    origin and sup|d u| is largest at t = 0 until the nonlinearity takes over.
    """
    return InitialData(eps=eps, B=B, f_modes={1: 1.0}, width=width, outgoing=True, m=m)


DEFAULT_EPS = (0.5, 0.38, 0.28, 0.21, 0.16)


@dataclass
class LifespanFit:
    points: list  # dicts: eps, T, width, bracket, confirmed, censored
    kappa: float
    intercept: float
    r2: float
    resolution: float
    monotone: bool
    residuals: list

    def summary(self) -> dict:
        return asdict(self)


def _blowup_job(args):
    eps, T_budget, dr, cfl, theta, rtol = args
    spec = build_spectrum(BaseInterval(0.0, math.pi), 1)
    return find_blowup(john_data(eps), preset("john"), T_budget, spec, dr=dr, cfl=cfl, theta=theta, rtol=rtol)


def fit_lifespan(points, resolution: float) -> LifespanFit:
    """Ordinary least squares of log T against 1/eps over uncensored points."""
    censored = [p for p in points if p["censored"]]
    if len(censored) > 1:
        raise CensoredSweep(f"{len(censored)} sweep points did not blow up within the budget")
    good = sorted((p for p in points if not p["censored"]), key=lambda p: -p["eps"])
    if len(good) < 3:
        raise CensoredSweep("fewer than three blowup times to fit")
    x = np.array([1.0 / p["eps"] for p in good])
    y = np.log([p["T"] for p in good])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    times = [p["T"] for p in good]
    monotone = all(b > a for a, b in zip(times, times[1:]))
    return LifespanFit(points, float(slope), float(intercept), r2, resolution, monotone, (y - pred).tolist())


def lifespan_sweep(eps_list=DEFAULT_EPS, dr: float = 0.1, cfl: float = 0.5, T_budget: float = 300.0,
                   theta: float = 10.0, rtol: float = 0.01, workers: int = 1) -> LifespanFit:
    """Blowup time of the John model for each eps (with dt-halving
    confirmation), then the fit log T = kappa / eps + c."""
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if len(eps_list) < 5 or eps_list[0] < 3 * eps_list[-1] * (1 - 1e-12):
        raise ValueError("the sweep needs at least 5 values of eps spanning a factor of 3")
    jobs = [(e, T_budget, dr, cfl, theta, rtol) for e in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            found = list(pool.map(_blowup_job, jobs))
    else:
        found = [_blowup_job(j) for j in jobs]
    points = []
    for e, b in zip(eps_list, found):
        if b["censored"]:
            points.append({"eps": e, "T": math.nan, "width": math.nan, "bracket": None, "confirmed": False,
                           "censored": True})
        else:
            points.append({"eps": e, "T": b["time"], "width": b["width"], "bracket": b["bracket"],
                           "coarse_bracket": b["coarse_bracket"], "confirmed": b["confirmed"],
                           "overlap": b["overlap"], "relative_gap": b["relative_gap"], "censored": False})
    return fit_lifespan(points, dr)


R2_MIN = 0.98
KAPPA_TOL = 0.15


def lifespan_refinement(eps_list=DEFAULT_EPS, drs=(0.1, 0.05), workers: int = 1, r2_min: float = R2_MIN,
                        kappa_tol: float = KAPPA_TOL, **kw) -> dict:
    """The sweep at two resolutions; kappa_rel_change is relative to the
    finer one.  ``checks`` holds each acceptance condition separately."""
    fits = [lifespan_sweep(eps_list, dr=dr, workers=workers, **kw) for dr in drs]
    k = [f.kappa for f in fits]
    change = abs(k[1] - k[0]) / abs(k[1])
    checks = {}
    for f in fits:
        tag = f"dr={f.resolution:g}"
        checks[f"{tag} monotone"] = f.monotone
        checks[f"{tag} r2>={r2_min:g}"] = bool(f.r2 >= r2_min)
        checks[f"{tag} kappa>0"] = bool(f.kappa > 0)
        checks[f"{tag} all confirmed"] = all(p["confirmed"] for p in f.points)
    checks[f"kappa change<={kappa_tol:g}"] = bool(change <= kappa_tol)
    return {"fits": fits, "kappa": k, "kappa_rel_change": change, "checks": checks,
            "passed": all(checks.values())}


# survival across families of nonlinearities


REGIME_FAMILIES = {
    "zero": "trivial",
    "john": "x-derivatives only",
    "null_form": "x-derivatives only",
    "quasi_x": "x-derivatives only",
    "semilinear_mixed": "y-derivatives, semilinear",
    "quasi_dt_dyy": "y-derivatives, compatible quasilinear",
    "quasi_dt_dtdy": "y-derivatives, incompatible quasilinear",
}


def theorem_regimes_report(eps: float = 0.05, T: float = 40.0, dr: float = 0.1, cfl: float = 0.5,
                           names=tuple(REGIME_FAMILIES), growth: float = 1.5) -> dict:
    """Small-data runs for each family.  Compatible nonlinearities must
    survive to T with (1 + t) sup|d_{t,x} u| within ``growth`` of the linear
    run on the same data; incompatible ones must be refused by the solver."""
    spec = build_spectrum(BaseInterval(0.0, math.pi), 3)
    data = InitialData(eps=eps, B=1.0, f_modes={1: 1.0, 2: 0.5}, g_modes={3: 0.25})
    lin = evolve(data, preset("zero"), T, spec, dr=dr, cfl=cfl, output_every=1.0)
    lin_max = float(((1.0 + lin.times) * lin.sup_dtx).max())
    rows = []
    for name in names:
        nl: Nonlinearity = preset(name)
        compat = check_neumann_compatibility(nl)
        row = {"nl": name, "family": REGIME_FAMILIES.get(name, "custom"), "compatible": compat.compatible}
        try:
            res = evolve(data, nl, T, spec, dr=dr, cfl=cfl, output_every=1.0)
        except CompatibilityRefused as exc:
            row.update({"status": "refused", "detail": str(exc)})
            rows.append(row)
            continue
        weighted = (1.0 + res.times) * res.sup_dtx
        row.update({
            "status": "blowup" if res.blew_up else "survived",
            "t_end": float(res.times[-1]),
            "weighted_sup_max": float(weighted.max()),
            "weighted_sup_end": float(weighted[-1]),
            "vs_linear": float(weighted.max()) / lin_max,
            "bounded": bool(weighted.max() <= growth * lin_max),
        })
        rows.append(row)
    ok = all((r["status"] == "refused") == (not r["compatible"]) for r in rows)
    ok &= all(r["status"] == "refused" or (r["status"] == "survived" and r["bounded"]) for r in rows)
    return {"rows": rows, "passed": ok, "params": {"eps": eps, "T": T, "dr": dr}}
