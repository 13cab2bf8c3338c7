"""Checks on evolved solutions: the energy inequality, mode commutation,
the Dirichlet structure of d_y u, and the cutoff-driven linear runs that
feed the dyadic decay estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from ..inequalities import DEGENERATE_FLOOR, Estimate, RatioReport, check_kg_decay, check_wave_decay
from ..spectral import BC, BaseInterval, ModeSpectrum, build_spectrum, mode_derivative_matrix, mode_matrix
from . import radial
from .cutoff import Cutoff, commutator
from .nonlinearity import Nonlinearity
from .solver import (
    Discretization,
    EnergyLedger,
    Equation,
    InitialData,
    RadialGrid,
    acceleration,
    evolve,
    reference_grid,
    rk4,
)

# energy inequality


def energy_inequality_check(ledger: EnergyLedger, label: str = "run") -> RatioReport:
    """sup_t ||d_{t,x,y} u(t)||_2 / int_0^t ||F||_2 over the recorded times.

    For the continuous problem with vanishing data the ratio is at most 1:
    d/dt ||du|| <= ||F||."""
    arr = ledger.as_arrays()
    grad, integral = arr["grad_norm"], arr["forcing_integral"]
    use = integral > DEGENERATE_FLOOR
    if not np.any(use):
        return RatioReport(Estimate.BASIC_ENERGY.value, label, float(arr["times"][-1]), math.nan, 0.0, math.nan,
                           len(grad), flags=["rhs_degenerate"])
    ratios = grad[use] / integral[use]
    i = int(np.argmax(ratios))
    return RatioReport(
        Estimate.BASIC_ENERGY.value, label, float(arr["times"][use][i]), float(ratios[i]), float(integral[use].min()),
        math.nan, int(use.sum()), lhs=float(grad[use][i]), rhs=float(integral[use][i]),
        details={"final_ratio": float(ratios[-1])},
    )


@dataclass(frozen=True)
class PulseForcing:
    """F(t, x) = p(t) phi(|x|) in the zero mode: p a unit-mass Gaussian of
    width ``sigma`` centred at ``center``, phi = bump of radius ``B``."""

    B: float = 2.0
    sigma: float = 0.25
    center: float = 2.0
    amplitude: float = 1.0
    m: int = 6

    def pulse(self, t):
        z = (np.asarray(t, dtype=float) - self.center) / self.sigma
        return self.amplitude * np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def phi(self, r):
        s = np.clip(np.asarray(r, dtype=float) / self.B, 0.0, 1.0)
        return (1.0 - s * s) ** self.m

    def equation(self, spec: ModeSpectrum, rgrid: RadialGrid, nl: Nonlinearity | None = None) -> Equation:
        F = np.zeros((spec.J, rgrid.M + 1))
        F[0] = self.phi(rgrid.r) / spec.norm_constants[0]
        return Equation(nl or Nonlinearity(), forcing=lambda t: self.pulse(t) * F)

    def phi_hat(self, k):
        """Radial Fourier transform 4 pi int phi(r) r sin(k r) / k dr."""
        k = float(k)
        if k == 0.0:
            return 4 * math.pi * quad(lambda r: self.phi(r) * r * r, 0, self.B)[0]
        return 4 * math.pi * quad(lambda r: self.phi(r) * r * math.sin(k * r) / k, 0, self.B, limit=200)[0]

    def duhamel_ratio(self) -> float:
        """||du(t)||_2 / int ||F||_2 after the pulse, in closed form.

        Duhamel in Fourier variables gives ||du||^2 = int |p_hat(|k|)|^2
        |phi_hat(k)|^2 dk / (2 pi)^3 with |p_hat|^2 = exp(-sigma^2 k^2), and
        int ||F|| = ||phi||; the base length factor cancels."""
        def dens(k, damp):
            return k * k * self.phi_hat(k) ** 2 * (math.exp(-((self.sigma * k) ** 2)) if damp else 1.0)

        top = 60.0 / self.B * self.m
        num = quad(dens, 0, top, args=(True,), limit=400)[0]
        den = quad(dens, 0, top, args=(False,), limit=400)[0]
        return math.sqrt(num / den)


def pulse_energy_run(forcing: PulseForcing, T: float, spec: ModeSpectrum, dr: float = 0.05, cfl: float = 0.25):
    """Linear run from zero data driven by the pulse; returns (report, result)."""
    data = InitialData(eps=0.0, B=forcing.B)
    rgrid = reference_grid(data, T, dr)
    eq = forcing.equation(spec, rgrid)
    res = evolve(data, eq, T, spec, cfl=cfl, output_every=0.25, rgrid=rgrid)
    return energy_inequality_check(res.ledger, f"pulse sigma={forcing.sigma:g}"), res


def pulse_refinement(forcing: PulseForcing, T: float, spec: ModeSpectrum, drs=(0.1, 0.05), cfl: float = 0.5,
                     rel_floor: float = 0.1) -> dict:
    """Forced runs at two resolutions.

    The sup of the energy ratio is approached where int ||F|| -> 0, so it
    creeps toward 1 as dt shrinks.  Refinement stability is measured on the
    ratio series at common times where the integral is at least
    ``rel_floor`` times its final value."""
    runs = [pulse_energy_run(forcing, T, spec, dr=dr, cfl=cfl) for dr in drs]
    series = []
    for _, res in runs:
        a = res.ledger.as_arrays()
        keep = a["forcing_integral"] >= rel_floor * a["forcing_integral"][-1]
        series.append(dict(zip(np.round(a["times"][keep], 9), a["grad_norm"][keep] / a["forcing_integral"][keep])))
    common = sorted(set(series[0]) & set(series[1]))
    change = max(abs(series[1][t] - series[0][t]) / series[1][t] for t in common)
    return {
        "drs": list(drs),
        "sup_ratio": [rep.ratio for rep, _ in runs],
        "final_ratio": [rep.details["final_ratio"] for rep, _ in runs],
        "duhamel_ratio": forcing.duhamel_ratio(),
        "series_change": float(change),
        "n_times": len(common),
    }


def free_wave_exact(r, t, B: float, m: int = 6):
    """Zero-mode free wave from u(0) = bump, u_t(0) = 0 by d'Alembert on r u.

    r u(t, r) = (F(r + t) + F(r - t)) / 2 with F(s) = s bump(|s|); at the
    origin u = F'(t)."""
    r = np.asarray(r, dtype=float)

    def f(s):
        z = np.clip(np.abs(s) / B, 0.0, 1.0)
        return (1.0 - z * z) ** m

    def F(s):
        return s * f(s)

    safe = np.where(r > 0, r, 1.0)
    u = (F(r + t) + F(r - t)) / (2.0 * safe)
    z = min(t / B, 1.0)
    at0 = (1.0 - z * z) ** m - 2.0 * m * z * z * (1.0 - z * z) ** (m - 1) if z < 1 else 0.0
    return np.where(r > 0, u, at0)


def convergence_order(drs=(0.2, 0.1, 0.05), T: float = 6.0, cfl: float = 0.5, B: float = 2.0) -> dict:
    """Max error of the zero mode against the exact free wave at time T, for
    each dr at fixed cfl, and the observed orders between consecutive dr."""
    spec = build_spectrum(BaseInterval(0.0, math.pi), 1)
    data = InitialData(eps=1.0, B=B, f_modes={1: 1.0})
    errors = []
    for dr in drs:
        res = evolve(data, Nonlinearity(), T, spec, dr=dr, cfl=cfl, output_every=T)
        u = res.final.U[0] * spec.norm_constants[0]
        errors.append(float(np.abs(u - free_wave_exact(res.final.disc.rgrid.r, T, B)).max()))
    orders = [math.log(a / b) / math.log(d0 / d1) for a, b, d0, d1 in zip(errors, errors[1:], drs, drs[1:])]
    return {"drs": list(drs), "errors": errors, "orders": orders, "T": T, "cfl": cfl}


REFERENCE_DR = 0.05
REFERENCE_CFL = 0.25


def energy_drift(T: float = 50.0, dr: float = REFERENCE_DR, cfl: float = REFERENCE_CFL, J: int = 3,
                 B: float = 2.0) -> dict:
    """Relative drift max_t |E(t) - E(0)| / E(0) of a linear Neumann run with
    data in three modes."""
    spec = build_spectrum(BaseInterval(0.0, math.pi), J)
    data = InitialData(eps=1.0, B=B, f_modes={1: 1.0, 2: 0.5}, g_modes={min(3, J): 0.25})
    res = evolve(data, Nonlinearity(), T, spec, dr=dr, cfl=cfl, output_every=0.5)
    E = np.asarray(res.ledger.energy)
    drift = np.abs(E - E[0]) / E[0]
    return {"times": res.times, "drift_series": drift, "drift": float(drift.max()), "energy0": float(E[0]),
            "dr": dr, "cfl": cfl, "T": T}


# mode commutation


def _fd2_y(u, dy, bc: BC):
    """Fourth-order second difference along axis 0 with even (Neumann) or
    odd (Dirichlet) reflection at both ends."""
    parity = 1.0 if bc == BC.NEUMANN else -1.0
    lo = parity * u[2:0:-1]
    hi = parity * u[-2:-4:-1]
    p = np.concatenate([lo, u, hi], axis=0)
    n = u.shape[0]
    return (-p[0:n] + 16 * p[1 : n + 1] - 30 * p[2 : n + 2] + 16 * p[3 : n + 3] - p[4 : n + 4]) / (12 * dy * dy)


def _trapezoid_weights(n, dy):
    w = np.full(n, dy)
    w[0] = w[-1] = 0.5 * dy
    return w


@dataclass
class CommutationReport:
    residual: float  # max_j sup_r |E_j box u - (d_t^2 - Lap + lambda_j^2) E_j u|
    scale: float  # largest single term of the modal operator
    tolerance: float
    per_mode: list
    box_residual: float  # sup |box u|, the discrete equation residual
    n_y: int
    times: list = field(default_factory=list)

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else 0.0

    @property
    def passed(self) -> bool:
        return self.relative <= self.tolerance


def mode_commutation_check(snapshots, spec: ModeSpectrum, dr: float, n_y: int = 1025,
                           tolerance: float = 1e-6) -> CommutationReport:
    """E_j box u against (d_t^2 - Lap_x + lambda_j^2) E_j u on stored snapshots.

    ``snapshots`` are consecutive triples (t - h, t, t + h) with equal
    spacing.  u is rebuilt on a fine uniform y grid, d_y^2 u is taken by
    finite differences in y, and E_j is trapezoid quadrature there, so the
    spectral representation is not used on the physical side."""
    if len(snapshots) < 3 or len(snapshots) % 3:
        raise ValueError("need snapshot triples (t - h, t, t + h)")
    base = spec.base
    y = np.linspace(base.a, base.b, n_y)
    dy = y[1] - y[0]
    E = mode_matrix(spec, y)  # (J, n_y)
    P = E * _trapezoid_weights(n_y, dy)
    lam2 = (spec.lambdas**2)[:, None]
    worst = np.zeros(spec.J)
    scale = 0.0
    box_res = 0.0
    times = []
    for i in range(0, len(snapshots), 3):
        a, b, c = snapshots[i : i + 3]
        h = b.t - a.t
        if not math.isclose(c.t - b.t, h, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("snapshot triples must be equally spaced")
        ua, ub, uc = (E.T @ s.U for s in (a, b, c))  # physical (n_y, M+1)
        box_u = (uc - 2 * ub + ua) / h**2 - radial.laplacian(ub, dr) - _fd2_y(ub, dy, base.bc)
        lhs = P @ box_u
        Ua, Ub, Uc = (P @ u for u in (ua, ub, uc))
        terms = ((Uc - 2 * Ub + Ua) / h**2, radial.laplacian(Ub, dr), lam2 * Ub)
        rhs = terms[0] - terms[1] + terms[2]
        worst = np.maximum(worst, np.abs(lhs - rhs).max(axis=1))
        # a zero-mode-only run has no lambda term, so every term sets the scale
        scale = max(scale, max(float(np.abs(x).max()) for x in terms))
        box_res = max(box_res, float(np.abs(box_u).max()))
        times.append(b.t)
    return CommutationReport(float(worst.max()), scale, tolerance, worst.tolist(), box_res, n_y, times)


def commutation_snapshot_times(centers, h):
    return [t + s for t in centers for s in (-h, 0.0, h)]


def commutation_run(data: InitialData, spec: ModeSpectrum, T: float, dr: float = 0.05, cfl: float = 0.25,
                    centers=None, steps: int = 4, n_y: int = 1025, tolerance: float = 1e-6,
                    output_every: float = 0.5, extra_times=()):
    """Linear run storing snapshot triples around ``centers`` (default T/4,
    T/2, 3T/4) spaced ``steps`` time steps apart, then the commutation check.
    Returns (report, result); the result also holds ``extra_times``."""
    n = int(math.ceil(T / (cfl * dr) - 1e-9))
    dt = T / n
    if centers is None:
        centers = (T / 4, T / 2, 3 * T / 4)
    h = steps * dt
    centers = [round(c / dt) * dt for c in centers]
    if min(centers) - h < 0 or max(centers) + h > T:
        raise ValueError("commutation triples must lie inside [0, T]")
    triple_times = commutation_snapshot_times(centers, h)
    res = evolve(data, Nonlinearity(), T, spec, dr=dr, cfl=cfl, output_every=output_every,
                 snapshot_times=list(triple_times) + list(extra_times))
    by_step = {int(round(s.t / dt)): s for s in res.snapshots}
    triples = [by_step[int(round(t / dt))] for t in triple_times]
    return mode_commutation_check(triples, spec, dr, n_y=n_y, tolerance=tolerance), res


# Dirichlet structure of d_y u


@dataclass
class DirichletReport:
    endpoint_max: float
    reconstruction_error: float
    scale: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.endpoint_max <= self.tolerance and self.reconstruction_error <= self.tolerance * max(self.scale, 1.0)


def dirichlet_trick_check(U, spec: ModeSpectrum, n_y: int = 513, tolerance: float = 1e-8) -> DirichletReport:
    """d_y u of a Neumann field, expanded in the Dirichlet sine basis.

    The sine coefficients are computed by quadrature on a fine grid and the
    expansion is summed back; the field must vanish at both endpoints and be
    reproduced by its sine series."""
    if spec.bc != BC.NEUMANN:
        raise ValueError("the derivative check applies to Neumann fields")
    base = spec.base
    y = np.linspace(base.a, base.b, n_y)
    dy = y[1] - y[0]
    uy = mode_derivative_matrix(spec, y).T @ U  # (n_y, M+1)
    sine = build_spectrum(BaseInterval(base.a, base.b, BC.DIRICHLET), spec.J + 2)
    S = mode_matrix(sine, y)
    coeff = (S * _trapezoid_weights(n_y, dy)) @ uy
    back = S.T @ coeff
    scale = float(np.abs(uy).max())
    return DirichletReport(
        endpoint_max=float(max(np.abs(uy[0]).max(), np.abs(uy[-1]).max())),
        reconstruction_error=float(np.abs(back - uy).max()),
        scale=scale,
        tolerance=tolerance,
    )


# cutoff-driven linear runs feeding the dyadic decay estimates


@dataclass
class DrivenRun:
    """w = u - eta u for the linear problem: vanishing data at t = 2B and
    forcing -[box, eta] u supported in [2B + 1/2, 2B + 1]."""

    times: np.ndarray
    sup_grad: np.ndarray  # sup |d_{t,x} w|
    mode_sup: np.ndarray  # (n, J) sup |w_j e_j|
    forcing_norms: np.ndarray  # ||box w||_2
    w_before: float  # sup |w| on t <= 2B + 1/2
    B: float
    meta: dict


def driven_run(data: InitialData, spec: ModeSpectrum, T: float, dr: float = 0.1, cfl: float = 0.5,
               output_every: float = 0.25, scale: float = 1.0) -> DrivenRun:
    cut = Cutoff(data.B)
    t0 = 2.0 * data.B
    rgrid = reference_grid(data, T, dr, t0)
    disc = Discretization(spec, rgrid)
    eq = Equation(Nonlinearity())
    emax = np.abs(disc.E).max(axis=1)

    def rhs(t, y):
        Ul, Utl, W, Wt = y
        F = -scale * commutator(cut, t, Ul, Utl)
        return Utl, acceleration(disc, eq, t, Ul, Utl), Wt, disc.linear(W) + F

    Ul, Utl = data.modal(spec, rgrid)
    y = (Ul, Utl, np.zeros_like(Ul), np.zeros_like(Ul))
    dt = cfl * dr
    n = int(math.ceil((T - t0) / dt - 1e-9))
    dt = (T - t0) / n
    every = max(1, int(round(output_every / dt)))
    times, grad, modes, fnorm = [], [], [], []
    w_before = 0.0
    for step in range(n + 1):
        t = t0 + step * dt
        W, Wt = y[2], y[3]
        if t <= cut.start + 1e-12:
            w_before = max(w_before, float(np.abs(W).max()), float(np.abs(Wt).max()))
        if step % every == 0 or step == n:
            d = disc.first_derivatives(W, Wt)
            times.append(t)
            grad.append(float(np.sqrt(d[0] ** 2 + d[1] ** 2).max()))
            modes.append(np.abs(W).max(axis=1) * emax)
            fnorm.append(disc.l2_norm(scale * commutator(cut, t, y[0], y[1])))
        if step == n:
            break
        y = rk4(rhs, t, y, dt)
        if t + dt > cut.end:
            # u_loc is no longer needed once the cutoff has switched off
            y = (np.zeros_like(y[0]), np.zeros_like(y[1]), y[2], y[3])
    return DrivenRun(np.asarray(times), np.asarray(grad), np.asarray(modes), np.asarray(fnorm), w_before, data.B,
                     {"dr": dr, "dt": dt, "T": T, "t0": t0, "scale": scale})


def driven_wave_decay(run: DrivenRun) -> RatioReport:
    return check_wave_decay(run.times, run.sup_grad, run.forcing_norms, run.B, label="zero mode")


def driven_kg_decay(run: DrivenRun, j: int) -> RatioReport:
    return check_kg_decay(run.times, run.mode_sup[:, j - 1], run.forcing_norms, run.B, label=f"mode {j}")


def kg_uniformity(mus=(1.0, 2.0, 5.0), T: float = 60.0, B: float = 1.0, dr: float = 0.1, eps: float = 1.0,
                  max_growth: float = 1.25) -> dict:
    """Klein-Gordon decay ratios for masses ``mus`` (Neumann modes on
    [0, pi], where lambda_j = j - 1).  Each run puts data in one mode.

    The constant in the estimate does not depend on the mass, so the ratio
    may not grow with it: the largest ratio is compared with the one at the
    smallest mass, allowing ``max_growth``."""
    J = int(round(max(mus))) + 1
    spec = build_spectrum(BaseInterval(0.0, math.pi), J)
    out = {}
    for mu in mus:
        j = int(round(mu)) + 1
        if not math.isclose(spec.lambdas[j - 1], mu):
            raise ValueError(f"mass {mu} is not an eigenvalue of the Neumann interval [0, pi]")
        data = InitialData(eps=eps, B=B, f_modes={j: 1.0})
        run = driven_run(data, spec, T, dr=dr)
        out[mu] = driven_kg_decay(run, j)
    ratios = [out[mu].ratio for mu in mus]
    growth = max(ratios) / ratios[0]
    return {"reports": out, "ratios": ratios, "growth": growth, "uniform": growth <= max_growth}
