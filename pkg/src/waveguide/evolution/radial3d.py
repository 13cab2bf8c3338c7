"""Standalone integrator for radial solutions of u_tt - Lap u = Q(du) in R^3.

Independent of the waveguide solver: second-order stencils on u itself
(u'' + 2u'/r, with 6(u_1 - u_0)/dr^2 at the origin), the strong-stability
preserving third-order Runge-Kutta scheme, and its own evaluation of the
nonlinearity.  Used to cross-check the zero mode of the waveguide solver.
"""

from __future__ import annotations

import math

import numpy as np

from .nonlinearity import Nonlinearity


def _radial_terms(nl: Nonlinearity):
    """(a, b) with Q = a u_t^2 + b |grad u|^2; other terms are refused."""
    if nl.quasilinear:
        raise ValueError("the standalone integrator handles semilinear nonlinearities only")
    R = nl.R
    if np.any(R[4]) or np.any(R[:, 4]):
        raise ValueError("y-derivative terms have no meaning in R^3")
    if np.any(R[0, 1:4]) or not np.allclose(R[1:4, 1:4], R[1, 1] * np.eye(3)):
        raise ValueError("nonlinearity is not rotation invariant")
    return float(R[0, 0]), float(R[1, 1])


def _derivatives(u, dr, r):
    n = u.shape[-1]
    p = np.concatenate([[u[1]], u, [0.0]])  # even reflection, zero past the edge
    ur = (p[2:] - p[:-2]) / (2 * dr)
    urr = (p[2:] - 2 * p[1:-1] + p[:-2]) / dr**2
    lap = np.empty(n)
    lap[1:] = urr[1:] + 2.0 * ur[1:] / r[1:]
    lap[0] = 3.0 * urr[0]
    ur[0] = 0.0
    return ur, lap


def evolve_radial3d(u0, u1, dr: float, T: float, nl: Nonlinearity | None = None, cfl: float = 0.4,
                    output_times=()):
    """Integrate from profiles ``u0``, ``u1`` on r_i = i dr to time T.

    Returns (u, u_t) at T and a dict of the same pair at each output time."""
    a, b = _radial_terms(nl) if nl is not None else (0.0, 0.0)
    u = np.array(u0, dtype=float)
    v = np.array(u1, dtype=float)
    r = np.arange(u.size) * dr
    n = int(math.ceil(T / (cfl * dr) - 1e-9))
    dt = T / n
    marks = {int(round(t / dt)): t for t in output_times}
    out = {}

    def rhs(u, v):
        ur, lap = _derivatives(u, dr, r)
        return v, lap + a * v * v + b * ur * ur

    for k in range(n + 1):
        if k in marks:
            out[marks[k]] = (u.copy(), v.copy())
        if k == n:
            break
        du, dv = rhs(u, v)
        u1_, v1_ = u + dt * du, v + dt * dv
        du, dv = rhs(u1_, v1_)
        u2_, v2_ = 0.75 * u + 0.25 * (u1_ + dt * du), 0.75 * v + 0.25 * (v1_ + dt * dv)
        du, dv = rhs(u2_, v2_)
        u = u / 3.0 + 2.0 / 3.0 * (u2_ + dt * du)
        v = v / 3.0 + 2.0 / 3.0 * (v2_ + dt * dv)
    return u, v, out
