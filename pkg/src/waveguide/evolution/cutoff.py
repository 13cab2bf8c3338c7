"""Time cutoff used to pass from the initial value problem to one with
vanishing data.

eta(t) = 1 for t <= 2B + 1/2 and 0 for t >= 2B + 1, with a C^4 polynomial
bridge in between.  If u solves the equation on [2B, 2B + 1] then u0 = eta u
solves it up to the commutator  [box, eta] u = eta'' u + 2 eta' u_t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..profiles import smoothstep
from ..spectral import ModeSpectrum
from .nonlinearity import Nonlinearity
from .solver import (
    Discretization,
    Equation,
    HyperbolicityLoss,
    InitialData,
    RadialGrid,
    acceleration,
    rk4,
)

_STEP = smoothstep(4)


class LocalExistenceFailure(RuntimeError):
    """The direct integration over [2B, 2B + 1] did not stay finite."""


@dataclass(frozen=True)
class Cutoff:
    B: float

    @property
    def start(self) -> float:
        return 2 * self.B + 0.5

    @property
    def end(self) -> float:
        return 2 * self.B + 1.0

    def derivatives(self, t, order: int = 2):
        """eta, eta', ..., eta^(order) at t (array of shape (order+1, ...))."""
        s = (np.asarray(t, dtype=float) - self.start) / (self.end - self.start)
        d = _STEP.derivatives(s, order)
        scale = (1.0 / (self.end - self.start)) ** np.arange(order + 1)
        out = -d * scale.reshape((-1,) + (1,) * (d.ndim - 1))
        out[0] += 1.0
        return out

    def __call__(self, t):
        return self.derivatives(t, 0)[0]

    def eta(self, t) -> float:
        return float(self.derivatives(t, 0)[0])

    def d1(self, t) -> float:
        return float(self.derivatives(t, 1)[1])

    def d2(self, t) -> float:
        return float(self.derivatives(t, 2)[2])


def commutator(cut: Cutoff, t, u, u_t):
    """[box, eta] u = eta'' u + 2 eta' u_t (box = d_t^2 - Laplacian)."""
    e = cut.derivatives(t, 2)
    return e[2] * u + 2.0 * e[1] * u_t


@dataclass
class CutoffSetup:
    cutoff: Cutoff
    disc: Discretization
    dt: float
    times: np.ndarray
    U: np.ndarray  # local solution, shape (steps, J, M+1)
    Ut: np.ndarray

    def u0(self, n: int):
        """(eta u, d_t(eta u)) at stored step n."""
        t = self.times[n]
        e = self.cutoff.derivatives(t, 1)
        return e[0] * self.U[n], e[1] * self.U[n] + e[0] * self.Ut[n]

    def forcing(self, n: int):
        """Tabulated [box, eta] u at stored step n (modal)."""
        return commutator(self.cutoff, self.times[n], self.U[n], self.Ut[n])


def integrate_local(data: InitialData, nl: Nonlinearity, spec: ModeSpectrum, rgrid: RadialGrid, dt: float,
                    t_start: float, t_end: float):
    """Direct integration from data posed at t_start; returns times and states."""
    disc = Discretization(spec, rgrid)
    eq = Equation(nl)
    U, Ut = data.modal(spec, rgrid)
    n = int(np.ceil((t_end - t_start) / dt - 1e-9))
    times = t_start + dt * np.arange(n + 1)
    Us, Uts = [U], [Ut]

    def rhs(t, y):
        return y[1], acceleration(disc, eq, t, y[0], y[1])

    y = (U, Ut)
    for k in range(n):
        try:
            y = rk4(rhs, times[k], y, dt)
        except HyperbolicityLoss as exc:
            raise LocalExistenceFailure(f"local segment failed at t={times[k]:.4g}: {exc}") from exc
        if not (np.all(np.isfinite(y[0])) and np.all(np.isfinite(y[1]))):
            raise LocalExistenceFailure(f"local segment became non-finite at t={times[k + 1]:.4g}")
        Us.append(y[0])
        Uts.append(y[1])
    return disc, times, np.array(Us), np.array(Uts)


def cutoff_setup(data: InitialData, nl: Nonlinearity, spec: ModeSpectrum, rgrid: RadialGrid, dt: float) -> CutoffSetup:
    """Data posed at t = 2B; integrate directly to 2B + 1 and tabulate
    u0 = eta u and the commutator forcing on the step grid."""
    cut = Cutoff(data.B)
    disc, times, U, Ut = integrate_local(data, nl, spec, rgrid, dt, 2 * data.B, cut.end)
    return CutoffSetup(cut, disc, dt, times, U, Ut)
