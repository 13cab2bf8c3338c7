"""Fourth-order finite differences on a uniform radial grid r_i = i dr.

Functions of r are even (u) or odd (v = r u) about the origin; ghost values
below r = 0 come from that reflection and values beyond the last node are
zero (the data and solution never reach the outer edge).  The radius is
the last axis of every array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# largest |eigenvalue| of the D2 stencil times dr^2
D2_SPECTRAL_RADIUS = 16.0 / 3.0


@dataclass(frozen=True)
class RadialGrid:
    dr: float
    M: int

    def __post_init__(self):
        if self.dr <= 0 or self.M < 8:
            raise ValueError("radial grid needs dr > 0 and at least 8 intervals")

    @classmethod
    def covering(cls, R: float, dr: float) -> "RadialGrid":
        return cls(dr, int(math.ceil(R / dr)))

    @property
    def R(self) -> float:
        return self.M * self.dr

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.dr

    @property
    def volume_weights(self) -> np.ndarray:
        """Trapezoid weights for integrals against 4 pi r^2 dr."""
        w = 4.0 * np.pi * self.r**2 * self.dr
        w[-1] *= 0.5
        return w

    def refined(self) -> "RadialGrid":
        return RadialGrid(self.dr / 2, 2 * self.M)


def _pad(a, parity):
    """Two ghost nodes on each side: reflection of the given parity at r = 0,
    zeros past the outer edge."""
    lo = parity * a[..., 2:0:-1]
    z = np.zeros(a.shape[:-1] + (2,))
    return np.concatenate([lo, a, z], axis=-1)


def _apply(stencil, a, parity):
    p = _pad(a, parity)
    n = a.shape[-1]
    return sum(c * p[..., k : k + n] for k, c in enumerate(stencil) if c != 0.0)


def d1(a, dr, parity=1.0):
    """d/dr of an even (parity 1) or odd (parity -1) function."""
    return _apply(_D1, a, parity) / dr


def d1_even(u, dr):
    """du/dr of an even function (zero at r = 0 by symmetry)."""
    return d1(u, dr, 1.0)


def d2_even(u, dr):
    return _apply(_D2, u, 1.0) / dr**2


def d2_odd(v, dr):
    """Second derivative of an odd function, v(0) = 0 enforced."""
    v = np.array(v, dtype=float)
    v[..., 0] = 0.0
    out = _apply(_D2, v, -1.0) / dr**2
    out[..., 0] = 0.0
    return out


def laplacian(u, dr):
    """3-D Laplacian of a radial function: (r u)'' / r for r > 0 and the
    limit 3 u''(0) at the origin."""
    r = np.arange(u.shape[-1]) * dr
    out = np.empty_like(u, dtype=float)
    out[..., 1:] = d2_odd(u * r, dr)[..., 1:] / r[1:]
    out[..., 0] = 3.0 * d2_even(u[..., :3], dr)[..., 0] if u.shape[-1] >= 3 else 0.0
    return out


def laplacian_direct(u, dr):
    """u'' + (2/r) u' with the same origin limit; a second route to the
    Laplacian used in cross-checks."""
    r = np.arange(u.shape[-1]) * dr
    urr = d2_even(u, dr)
    ur = d1_even(u, dr)
    out = np.empty_like(urr)
    out[..., 1:] = urr[..., 1:] + 2.0 * ur[..., 1:] / r[1:]
    out[..., 0] = 3.0 * urr[..., 0]
    return out


def ur_over_r(u, dr):
    """u'/r, with limit u''(0) at the origin."""
    r = np.arange(u.shape[-1]) * dr
    ur = d1_even(u, dr)
    out = np.empty_like(ur)
    out[..., 1:] = ur[..., 1:] / r[1:]
    out[..., 0] = d2_even(u[..., :3], dr)[..., 0]
    return out


def discrete_energy(U, Ut, lambdas, dr):
    """Energy conserved by the semi-discrete linear scheme, per mode:
    (1/2) 4 pi dr sum_i [ vt_i^2 - v_i (D2 v)_i + lambda^2 v_i^2 ] with v = r u.
    Approximates (1/2) int (u_t^2 + u_r^2 + lambda^2 u^2) 4 pi r^2 dr."""
    r = np.arange(U.shape[-1]) * dr
    v = U * r
    vt = Ut * r
    lam2 = np.asarray(lambdas, dtype=float)[:, None] ** 2
    dens = vt**2 - v * d2_odd(v, dr) + lam2 * v**2
    return 0.5 * 4.0 * np.pi * dr * dens.sum(axis=-1)
