"""Piecewise-polynomial profiles: compact bumps and smooth steps.

Each profile returns its value and derivatives up to a requested order, which
is what both the jet composition and the evolution cutoffs consume.
"""

from __future__ import annotations

from math import comb

import numpy as np
from numpy.polynomial import Polynomial


class PiecewisePoly:
    """``poly`` on ``[lo, hi]``, constants ``below``/``above`` outside."""

    def __init__(self, poly: Polynomial, lo: float, hi: float, below: float = 0.0, above: float = 0.0):
        self.poly = poly
        self.lo = lo
        self.hi = hi
        self.below = below
        self.above = above

    def derivatives(self, s, order: int) -> np.ndarray:
        """Array of shape (order+1, *s.shape) holding f, f', ..., f^(order)."""
        s = np.asarray(s, dtype=float)
        out = np.zeros((order + 1,) + s.shape)
        inside = (s > self.lo) & (s < self.hi)
        p = self.poly
        for n in range(order + 1):
            out[n] = np.where(inside, p(s), 0.0)
            p = p.deriv()
        out[0] = np.where(s <= self.lo, self.below, out[0])
        out[0] = np.where(s >= self.hi, self.above, out[0])
        return out

    def __call__(self, s, derivative: int = 0):
        return self.derivatives(s, derivative)[derivative]

    def jet(self, z):
        """Compose with a :class:`~waveguide.jets.Jet`."""
        return z.compose(list(self.derivatives(z.value, z.order)))


def poly_bump(m: int = 8) -> PiecewisePoly:
    """(1 - s^2)^m on |s| < 1, zero elsewhere; of class C^(m-1)."""
    p = Polynomial([1.0, 0.0, -1.0]) ** m
    return PiecewisePoly(p, -1.0, 1.0)


def smoothstep(n: int = 4) -> PiecewisePoly:
    """0 for z <= 0, 1 for z >= 1, degree 2n+1 polynomial between; C^n."""
    coef = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coef[n + 1 + k] = comb(n + k, k) * comb(2 * n + 1, n - k) * (-1) ** k
    return PiecewisePoly(Polynomial(coef), 0.0, 1.0, below=0.0, above=1.0)
