"""Method-of-lines integration of  u_tt - Lap_x u - u_yy = Q(du, d^2u) + F  on
R^3 x [a, b] for solutions radial in x.

The state is stored as mode coefficients U_j(r) of the y eigenfunctions.
Linear terms act per mode (Lap_r - lambda_j^2, with Lap_r taken through
v = r u); nonlinear terms are formed on the physical (y, r) grid and
projected back, which is the Galerkin truncation.  Quasilinear terms are
affine in u_tt, so u_tt is isolated pointwise by dividing by the
coefficient 1 - sum_l B^{00}_l d_l u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..spectral import ModeSpectrum, YGrid, mode_derivative_matrix, mode_matrix
from . import radial
from .nonlinearity import Nonlinearity, check_neumann_compatibility
from .radial import RadialGrid

HYPERBOLICITY_FLOOR = 0.5
DOMAIN_TOL = 1e-8


class HyperbolicityLoss(RuntimeError):
    """The coefficient of u_tt fell below the floor: the run is nearing blowup."""


class StepRejected(ValueError):
    """The time step violates the stability limit."""


class DomainOverflow(RuntimeError):
    """The solution reached the outer edge of the radial grid."""


class CompatibilityRefused(ValueError):
    """Quasilinear y terms without the Neumann compatibility condition."""


# initial data


def bump(r, B, m=6):
    """(1 - (r/B)^2)^m on r < B, zero outside."""
    s = np.clip(np.asarray(r, dtype=float) / B, 0.0, 1.0)
    return (1.0 - s * s) ** m


def shell(r, B, width, m=6, derivative=False):
    """(1 - ((r - c)/width)^2)^m around c = B - width; zero near the origin
    and outside r < B.  With ``derivative`` the r-derivative instead."""
    z = (np.asarray(r, dtype=float) - (B - width)) / width
    s = np.clip(z, -1.0, 1.0)
    if derivative:
        return np.where(np.abs(z) < 1, -2.0 * m * s * (1.0 - s * s) ** (m - 1) / width, 0.0)
    return (1.0 - s * s) ** m


@dataclass(frozen=True)
class InitialData:
    """u(0) = eps sum_j f_j p(r) e_j(y) / max|e_j|, likewise u_t(0) with g_j.

    The radial profile p is a ball bump of radius B, or with ``width`` set a
    shell of half-width ``width`` whose outer edge is at B.  Mode amplitudes
    are physical sup-norm amplitudes.  Built from the eigenfunctions, the
    data satisfies the boundary condition in y.

    ``outgoing`` (shells only) replaces the pair by u = F/r, u_t = -F'/r with
    F the shell profile, so that for the free wave r u = F(r - t) carries no
    incoming part.  The amplitudes in ``f_modes`` then scale sup|u_t(0)|.
    """

    eps: float
    B: float = 2.0
    f_modes: dict = field(default_factory=lambda: {1: 1.0})
    g_modes: dict = field(default_factory=dict)
    m: int = 6
    width: float | None = None
    outgoing: bool = False

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("support radius B must be positive")
        if self.width is not None and not 0 < 2 * self.width < self.B:
            raise ValueError("a shell profile needs 0 < 2 * width < B")
        if self.outgoing and (self.width is None or self.g_modes):
            raise ValueError("outgoing data needs a shell profile and no g_modes")
        for modes in (self.f_modes, self.g_modes):
            if any(int(j) < 1 for j in modes):
                raise ValueError("mode indices start at 1")

    @property
    def y_independent(self) -> bool:
        return set(self.f_modes) | set(self.g_modes) <= {1}

    def max_mode(self) -> int:
        return max(set(self.f_modes) | set(self.g_modes) | {1})

    def modal(self, spec: ModeSpectrum, rgrid: RadialGrid):
        if self.max_mode() > spec.J:
            raise ValueError(f"data uses mode {self.max_mode()} but only {spec.J} are retained")
        U = np.zeros((spec.J, rgrid.M + 1))
        Ut = np.zeros_like(U)
        if self.outgoing:
            p0, p1 = self._outgoing_profiles(rgrid.r)
            terms = ((self.f_modes, p0, U), (self.f_modes, p1, Ut))
        else:
            prof = self.profile(rgrid.r)
            terms = ((self.f_modes, prof, U), (self.g_modes, prof, Ut))
        for modes, prof, out in terms:
            for j, amp in modes.items():
                out[int(j) - 1] += self.eps * amp / spec.norm_constants[int(j) - 1] * prof
        return U, Ut

    def _outgoing_profiles(self, r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        scale = 1.0 / self.outgoing_scale()
        u0 = np.where(r > 0, self.profile(r) / safe, 0.0)
        u1 = np.where(r > 0, -shell(r, self.B, self.width, self.m, derivative=True) / safe, 0.0)
        return scale * u0, scale * u1

    def outgoing_scale(self) -> float:
        """sup_r |F'(r) / r| for the shell profile F."""
        r = np.linspace(self.B - 2 * self.width, self.B, 4001)[1:-1]
        return float(np.max(np.abs(shell(r, self.B, self.width, self.m, derivative=True) / r)))

    def profile(self, r):
        if self.width is None:
            return bump(r, self.B, self.m)
        return shell(r, self.B, self.width, self.m)

    def with_eps(self, eps: float) -> "InitialData":
        return replace(self, eps=eps)


# discretization


class Discretization:
    """Radial grid, y modes and the maps between modes and physical values."""

    def __init__(self, spec: ModeSpectrum, rgrid: RadialGrid, ygrid: YGrid | None = None):
        self.spec = spec
        self.rgrid = rgrid
        # products of three retained modes are integrated exactly
        self.ygrid = ygrid or YGrid.for_spectrum(spec, factor=3)
        y = self.ygrid.nodes
        self.E = mode_matrix(spec, y)  # (J, ny)
        self.dE = mode_derivative_matrix(spec, y)
        self.P = self.E * self.ygrid.weights  # projection rows
        self.lam2 = (spec.lambdas**2)[:, None]
        self.dr = rgrid.dr
        self.r = rgrid.r

    @property
    def J(self) -> int:
        return self.spec.J

    def phys(self, U):
        """(J, M+1) modes -> (ny, M+1) values."""
        return self.E.T @ U

    def phys_y(self, U):
        return self.dE.T @ U

    def project(self, u):
        return self.P @ u

    def linear(self, U):
        """Lap_r U - lambda^2 U, per mode."""
        return radial.laplacian(U, self.dr) - self.lam2 * U

    def max_dt(self, cfl_limit: float = 2.0) -> float:
        """Largest RK4 step keeping dt * omega_max below ``cfl_limit``."""
        w2 = radial.D2_SPECTRAL_RADIUS / self.dr**2 + float(self.lam2.max())
        return cfl_limit / math.sqrt(w2)

    def first_derivatives(self, U, Ut):
        """d = (u_t, u_r, 0, 0, u_y) on the physical grid; at a point of the
        positive x_1 axis these are the Cartesian first derivatives."""
        d = np.zeros((5, len(self.ygrid), self.rgrid.M + 1))
        d[0] = self.phys(Ut)
        d[1] = self.phys(radial.d1_even(U, self.dr))
        d[4] = self.phys_y(U)
        return d

    def second_derivatives(self, U, Ut):
        """Cartesian Hessian on the x_1 axis, with the u_tt slot left zero."""
        H = np.zeros((5, 5, len(self.ygrid), self.rgrid.M + 1))
        Ur = radial.d1_even(U, self.dr)
        H[0, 1] = H[1, 0] = self.phys(radial.d1_even(Ut, self.dr))
        H[0, 4] = H[4, 0] = self.phys_y(Ut)
        H[1, 1] = self.phys(radial.d2_even(U, self.dr))
        H[2, 2] = H[3, 3] = self.phys(radial.ur_over_r(U, self.dr))
        H[1, 4] = H[4, 1] = self.phys_y(Ur)
        H[4, 4] = self.phys(-self.lam2 * U)
        return H

    def l2_norm(self, U):
        """||sum_j U_j e_j||_{L^2(R^3 x [a,b])} by Parseval in y."""
        w = self.rgrid.volume_weights
        return math.sqrt(max(float(np.sum(U * U * w)), 0.0))


def hyperbolic_acceleration(nl: Nonlinearity, lin_phys, d, H, factor=1.0):
    """Solve (1 - factor * c(d)) u_tt = lin + factor * Q_rest(d, H) pointwise."""
    coef = 1.0 - factor * nl.dtt_coefficient(d)
    low = float(np.min(coef))
    if not low >= HYPERBOLICITY_FLOOR:
        raise HyperbolicityLoss(f"u_tt coefficient fell to {low:.3g}")
    return (lin_phys + factor * nl.evaluate(d, H)) / coef


@dataclass
class Equation:
    """u_tt = Lap u + q(t) Q(du, d^2u) - p(t) u - s(t) u_t + F(t).

    ``forcing`` returns modal values (J, M+1).  p, s and q default to 0, 0, 1;
    the cutoff construction supplies them.
    """

    nl: Nonlinearity
    forcing: Callable | None = None
    potential: Callable | None = None
    damping: Callable | None = None
    q_factor: Callable | None = None


def acceleration(disc: Discretization, eq: Equation, t, U, Ut, source=None):
    """Modal u_tt.  ``source`` = (U', Ut') supplies the first derivatives
    inside Q (a frozen coefficient); by default they come from (U, Ut)."""
    lin = disc.linear(U)
    if eq.forcing is not None:
        lin = lin + eq.forcing(t)
    if eq.potential is not None:
        lin = lin - eq.potential(t) * U
    if eq.damping is not None:
        lin = lin - eq.damping(t) * Ut
    q = 1.0 if eq.q_factor is None else eq.q_factor(t)
    if eq.nl.is_zero or q == 0.0:
        return lin
    d = disc.first_derivatives(*(source or (U, Ut)))
    if not eq.nl.quasilinear:
        return lin + q * disc.project(eq.nl.evaluate(d))
    H = disc.second_derivatives(U, Ut)
    return disc.project(hyperbolic_acceleration(eq.nl, disc.phys(lin), d, H, q))


def nonlinear_term(disc: Discretization, eq: Equation, t, U, Ut):
    """Modal Q(du, d^2u) (times the q factor), with u_tt taken from the equation."""
    if eq.nl.is_zero:
        return np.zeros_like(U)
    if not eq.nl.quasilinear and eq.q_factor is None:
        return disc.project(eq.nl.evaluate(disc.first_derivatives(U, Ut)))
    return acceleration(disc, eq, t, U, Ut) - acceleration(disc, replace(eq, nl=Nonlinearity()), t, U, Ut)


def rk4(rhs, t, y, dt):
    """One classical Runge-Kutta step for a tuple of arrays."""
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, tuple(a + dt / 2 * b for a, b in zip(y, k1)))
    k3 = rhs(t + dt / 2, tuple(a + dt / 2 * b for a, b in zip(y, k2)))
    k4 = rhs(t + dt, tuple(a + dt * b for a, b in zip(y, k3)))
    return tuple(a + dt / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4))


# state


@dataclass(frozen=True)
class WaveguideState:
    t: float
    U: np.ndarray
    Ut: np.ndarray
    disc: Discretization = field(repr=False)
    dt: float = math.nan

    @property
    def u(self):
        return self.disc.phys(self.U)

    @property
    def u_t(self):
        return self.disc.phys(self.Ut)

    @property
    def mode_view(self):
        """v_j = r u_j per mode."""
        return self.U * self.disc.r

    def energy(self) -> float:
        return float(radial.discrete_energy(self.U, self.Ut, self.disc.spec.lambdas, self.disc.dr).sum())

    def sup_dtx(self) -> float:
        d = self.disc.first_derivatives(self.U, self.Ut)
        return float(np.sqrt(d[0] ** 2 + d[1] ** 2).max())

    def sup_dt(self) -> float:
        return float(np.abs(self.u_t).max())

    def support_radius(self, rel: float = DOMAIN_TOL) -> float:
        """Largest r where |u| or |u_t| exceeds ``rel`` times its maximum."""
        mag = np.abs(self.U).max(axis=0) + np.abs(self.Ut).max(axis=0)
        top = mag.max()
        if top == 0.0:
            return 0.0
        idx = np.flatnonzero(mag > rel * top)
        return float(self.disc.r[idx[-1]])


def initial_state(data: InitialData, disc: Discretization, t0: float = 0.0) -> WaveguideState:
    U, Ut = data.modal(disc.spec, disc.rgrid)
    return WaveguideState(t0, U, Ut, disc)


def step_physical(state: WaveguideState, nl: Nonlinearity | Equation, dt: float) -> WaveguideState:
    """One RK4 step of the coupled mode system."""
    eq = nl if isinstance(nl, Equation) else Equation(nl)
    if not 0 < dt <= state.disc.max_dt():
        raise StepRejected(f"dt={dt:.4g} exceeds the stability limit {state.disc.max_dt():.4g}")
    disc = state.disc

    def rhs(t, y):
        return y[1], acceleration(disc, eq, t, y[0], y[1])

    U, Ut = rk4(rhs, state.t, (state.U, state.Ut), dt)
    return WaveguideState(state.t + dt, U, Ut, disc, dt)


# evolution driver


@dataclass
class Snapshot:
    t: float
    U: np.ndarray
    Ut: np.ndarray


@dataclass
class EnergyLedger:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    forcing_norm: list = field(default_factory=list)
    forcing_integral: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)

    def as_arrays(self) -> dict:
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


@dataclass
class EvolveResult:
    times: np.ndarray
    sup_dtx: np.ndarray
    sup_dt: np.ndarray
    sup_dy: np.ndarray
    mode_sup: np.ndarray
    mode_grad_sup: np.ndarray
    forcing_norms: np.ndarray
    ledger: EnergyLedger
    snapshots: list
    final: WaveguideState
    blowup: dict | None
    meta: dict

    @property
    def blew_up(self) -> bool:
        return self.blowup is not None


def reference_grid(data: InitialData, T: float, dr: float, t0: float = 0.0, margin: float = 2.0) -> RadialGrid:
    """R = B + (T - t0) + margin + 5 cells, with the margin grown by 5% of the
    run length: high-frequency grid noise travels slightly faster than 1."""
    return RadialGrid.covering(data.B + 1.05 * (T - t0) + margin + 5 * dr, dr)


def evolve(
    data: InitialData,
    nl: Nonlinearity | Equation,
    T: float,
    spec: ModeSpectrum,
    dr: float = 0.05,
    cfl: float = 0.5,
    output_every: float = 0.5,
    snapshot_times=(),
    t0: float = 0.0,
    theta: float = 10.0,
    blowup_check: bool = True,
    rgrid: RadialGrid | None = None,
    initial: tuple | None = None,
) -> EvolveResult:
    """Integrate from t0 to T (or to detected blowup).

    Blowup: sup|u_t| above ``theta`` times the initial sup|d_{t,x} u|, a
    loss of hyperbolicity, or non-finite values.  The blowup record holds
    the bracket [last good time, failing time].
    """
    eq = nl if isinstance(nl, Equation) else Equation(nl)
    if eq.nl.has_y_quasilinear:
        rep = check_neumann_compatibility(eq.nl)
        if not rep.compatible:
            raise CompatibilityRefused(
                f"nonlinearity {eq.nl.name!r} violates the Neumann compatibility condition; "
                f"witness {rep.witnesses[0] if rep.witnesses else None}"
            )
    if not eq.nl.rotation_invariant:
        raise ValueError("radial evolution needs a rotation-invariant nonlinearity")
    rgrid = rgrid or reference_grid(data, T, dr, t0)
    disc = Discretization(spec, rgrid)
    if initial is None:
        state = initial_state(data, disc, t0)
    else:
        state = WaveguideState(t0, initial[0], initial[1], disc)
    dt = cfl * rgrid.dr
    if dt > disc.max_dt():
        raise StepRejected(f"cfl={cfl} gives dt={dt:.4g} above the stability limit {disc.max_dt():.4g}")
    n_steps = int(math.ceil((T - t0) / dt - 1e-9))
    dt = (T - t0) / n_steps if n_steps else dt
    every = max(1, int(round(output_every / dt)))
    snap_steps = {int(round((s - t0) / dt)) for s in snapshot_times}

    rows = {"t": [], "sup_dtx": [], "sup_dt": [], "sup_dy": [], "mode_sup": [], "mode_grad": [], "forcing": []}
    ledger = EnergyLedger()
    snapshots = []
    forcing_integral = 0.0
    last_forcing = None

    def forcing_norm(st):
        F = nonlinear_term(disc, eq, st.t, st.U, st.Ut)
        if eq.forcing is not None:
            F = F + eq.forcing(st.t)
        return disc.l2_norm(F)

    def record(st, fnorm):
        d = disc.first_derivatives(st.U, st.Ut)
        rows["t"].append(st.t)
        rows["sup_dtx"].append(float(np.sqrt(d[0] ** 2 + d[1] ** 2).max()))
        rows["sup_dt"].append(float(np.abs(d[0]).max()))
        rows["sup_dy"].append(float(np.abs(d[4]).max()))
        rows["mode_sup"].append(np.abs(st.U).max(axis=1) * np.abs(disc.E).max(axis=1))
        Ur = radial.d1_even(st.U, disc.dr)
        rows["mode_grad"].append(np.sqrt(st.Ut**2 + Ur**2).max(axis=1) * np.abs(disc.E).max(axis=1))
        rows["forcing"].append(fnorm)
        ledger.times.append(st.t)
        ledger.energy.append(st.energy())
        ledger.forcing_norm.append(fnorm)
        ledger.forcing_integral.append(forcing_integral)
        grad2 = 2.0 * ledger.energy[-1]
        ledger.grad_norm.append(math.sqrt(max(grad2, 0.0)))

    d0 = disc.first_derivatives(state.U, state.Ut)
    scale0 = float(max(np.abs(d0[0]).max(), np.abs(d0[1]).max(), np.abs(d0[4]).max()))
    threshold = theta * scale0 if scale0 > 0 else math.inf
    last_forcing = forcing_norm(state)
    record(state, last_forcing)
    if 0 in snap_steps:
        snapshots.append(Snapshot(state.t, state.U.copy(), state.Ut.copy()))
    blowup = None
    for n in range(1, n_steps + 1):
        try:
            new = step_physical(state, eq, dt)
            bad = not (np.all(np.isfinite(new.U)) and np.all(np.isfinite(new.Ut)))
        except (HyperbolicityLoss, FloatingPointError, OverflowError) as exc:
            new, bad = None, str(exc)
        if not bad and blowup_check and new.sup_dt() > threshold:
            bad = "amplitude threshold"
        if bad:
            if not blowup_check:
                raise HyperbolicityLoss(f"run failed at t={state.t + dt:.6g}: {bad}")
            blowup = {
                "t_last_good": state.t,
                "t_fail": state.t + dt,
                "time": state.t + dt / 2,
                "width": dt,
                "reason": bad if isinstance(bad, str) else "non-finite values",
                "threshold": threshold,
            }
            break
        state = new
        if eq.forcing is not None or not eq.nl.is_zero:
            f_new = forcing_norm(state)
            forcing_integral += 0.5 * dt * (last_forcing + f_new)
            last_forcing = f_new
        if n % every == 0 or n == n_steps:
            if eq.forcing is None and eq.nl.is_zero:
                last_forcing = 0.0
            record(state, last_forcing)
            reach = state.support_radius()
            if reach > rgrid.R - 5 * rgrid.dr:
                raise DomainOverflow(f"solution reached r={reach:.4g} on a grid of radius {rgrid.R:.4g}")
        if n in snap_steps:
            snapshots.append(Snapshot(state.t, state.U.copy(), state.Ut.copy()))

    return EvolveResult(
        times=np.asarray(rows["t"]),
        sup_dtx=np.asarray(rows["sup_dtx"]),
        sup_dt=np.asarray(rows["sup_dt"]),
        sup_dy=np.asarray(rows["sup_dy"]),
        mode_sup=np.asarray(rows["mode_sup"]),
        mode_grad_sup=np.asarray(rows["mode_grad"]),
        forcing_norms=np.asarray(rows["forcing"]),
        ledger=ledger,
        snapshots=snapshots,
        final=state,
        blowup=blowup,
        meta={"dr": rgrid.dr, "R": rgrid.R, "dt": dt, "J": spec.J, "bc": spec.bc.value,
              "L": spec.base.length, "t0": t0, "T": T, "nl": eq.nl.name, "eps": data.eps},
    )


def find_blowup(data: InitialData, nl: Nonlinearity, T: float, spec: ModeSpectrum, dr: float = 0.05,
                cfl: float = 0.5, theta: float = 10.0, rtol: float = 0.01) -> dict:
    """Blowup bracket at dt and at dt/2.

    The time is confirmed when both runs blow up and their brackets agree to
    within the two bracket widths plus ``rtol`` times the blowup time; the
    time-stepping error in T exceeds a single step well before the run ends,
    so literal overlap is reported separately."""
    runs = []
    for c in (cfl, cfl / 2):
        res = evolve(data, nl, T, spec, dr=dr, cfl=c, output_every=T, theta=theta)
        runs.append(res.blowup)
    a, b = runs
    if a is None or b is None:
        return {"censored": True, "eps": data.eps, "coarse": a, "fine": b, "confirmed": False}
    overlap = a["t_last_good"] <= b["t_fail"] + 1e-12 and b["t_last_good"] <= a["t_fail"] + 1e-12
    gap = abs(a["time"] - b["time"])
    return {
        "censored": False,
        "eps": data.eps,
        "time": b["time"],
        "width": b["width"],
        "bracket": [b["t_last_good"], b["t_fail"]],
        "coarse_bracket": [a["t_last_good"], a["t_fail"]],
        "overlap": bool(overlap),
        "relative_gap": gap / b["time"],
        "confirmed": bool(gap <= a["width"] + b["width"] + rtol * b["time"]),
        "shrink": b["width"] / a["width"],
    }
