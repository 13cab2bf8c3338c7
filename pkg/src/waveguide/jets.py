"""Truncated multivariate Taylor arithmetic (forward-mode jets).

A :class:`Jet` stores the Taylor coefficients ``c_alpha = d^alpha f / alpha!``
of a function at a batch of points, for every multi-index with
``|alpha| <= order``.  Differentiation lowers the order by one; products and
compositions truncate at the smaller order of their operands.  Mixed partials
are symmetric by construction since each multi-index is stored once.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

MAX_ORDER = 8


class OrderExhausted(ValueError):
    """A derivative was requested beyond the order a jet carries."""


def _multi_indices(nvars, order):
    out = []
    for deg in range(order + 1):
        level = []
        for combo in combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for v in combo:
                alpha[v] += 1
            level.append(tuple(alpha))
        out.extend(sorted(level, reverse=True))
    return out


class JetBasis:
    """Index bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if order < 0:
            raise OrderExhausted("jet order below zero")
        if order > MAX_ORDER:
            raise OrderExhausted(f"jet order {order} exceeds the supported maximum {MAX_ORDER}")
        self.nvars = nvars
        self.order = order
        self.alphas = _multi_indices(nvars, order)
        self.index = {a: i for i, a in enumerate(self.alphas)}
        self.size = len(self.alphas)
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in self.alphas], dtype=float
        )
        self._deriv = {}
        self._shift = {}
        self._mul = None

    def __repr__(self):
        return f"JetBasis(nvars={self.nvars}, order={self.order})"

    def unit(self, i):
        e = [0] * self.nvars
        e[i] = 1
        return tuple(e)

    def deriv_plan(self, i):
        """(src, factor) such that (d_i f) in basis(order-1) is factor * c[src]."""
        if i not in self._deriv:
            lower = basis(self.nvars, self.order - 1)
            src = []
            fac = []
            for a in lower.alphas:
                b = list(a)
                b[i] += 1
                src.append(self.index[tuple(b)])
                fac.append(b[i])
            self._deriv[i] = (np.array(src), np.array(fac, dtype=float))
        return self._deriv[i]

    def shift_plan(self, i):
        """(dst, src) for the nilpotent part of multiplication by x_i."""
        if i not in self._shift:
            dst = []
            src = []
            for k, a in enumerate(self.alphas):
                if a[i] > 0:
                    b = list(a)
                    b[i] -= 1
                    dst.append(k)
                    src.append(self.index[tuple(b)])
            self._shift[i] = (np.array(dst, dtype=int), np.array(src, dtype=int))
        return self._shift[i]

    def mul_plan(self):
        if self._mul is None:
            ia, ib, ic = [], [], []
            for kc, g in enumerate(self.alphas):
                for ka, a in enumerate(self.alphas):
                    if all(x <= y for x, y in zip(a, g)):
                        b = tuple(y - x for x, y in zip(a, g))
                        ia.append(ka)
                        ib.append(self.index[b])
                        ic.append(kc)
            ic = np.array(ic)
            starts = np.flatnonzero(np.r_[True, ic[1:] != ic[:-1]])
            self._mul = (np.array(ia), np.array(ib), starts)
        return self._mul

    def positions_in(self, other: "JetBasis"):
        """Positions of this basis' multi-indices inside a larger basis."""
        return np.array([other.index[a] for a in self.alphas])


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> JetBasis:
    return JetBasis(nvars, order)


class Jet:
    """Taylor jet at a batch of points.

    ``c`` has shape ``(basis.size, P)``; ``point`` holds the coordinate
    values, shape ``(nvars, P)``, needed when a jet is multiplied by a
    coordinate function (vector fields with polynomial coefficients).
    """

    __slots__ = ("basis", "c", "point")

    def __init__(self, basis_: JetBasis, c: np.ndarray, point: np.ndarray):
        self.basis = basis_
        self.c = c
        self.point = point

    # construction
    @classmethod
    def variable(cls, nvars, order, i, point):
        b = basis(nvars, order)
        c = np.zeros((b.size,) + point.shape[1:])
        c[0] = point[i]
        if order >= 1:
            c[b.index[b.unit(i)]] = 1.0
        return cls(b, c, point)

    @classmethod
    def constant(cls, nvars, order, value, point):
        b = basis(nvars, order)
        c = np.zeros((b.size,) + point.shape[1:])
        c[0] = value
        return cls(b, c, point)

    @classmethod
    def variables(cls, order, point):
        point = np.asarray(point, dtype=float)
        return [cls.variable(point.shape[0], order, i, point) for i in range(point.shape[0])]

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def partial(self, alpha) -> np.ndarray:
        """The derivative d^alpha f (not the Taylor coefficient)."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise OrderExhausted(f"derivative of order {sum(alpha)} from a jet of order {self.order}")
        k = self.basis.index[alpha]
        return self.c[k] * self.basis.factorials[k]

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise OrderExhausted(f"cannot raise a jet from order {self.order} to {order}")
        lower = basis(self.basis.nvars, order)
        return Jet(lower, self.c[: lower.size], self.point)

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order == self.order:
                return self, other
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, None

    # arithmetic
    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            c = a.c.copy()
            c[0] = c[0] + other
            return Jet(a.basis, c, a.point)
        return Jet(a.basis, a.c + b.c, a.point)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.c, self.point)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return Jet(a.basis, a.c * other, a.point)
        ia, ib, starts = a.basis.mul_plan()
        prod = a.c[ia] * b.c[ib]
        return Jet(a.basis, np.add.reduceat(prod, starts, axis=0), a.point)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(self.basis.nvars, self.order, 1.0, self.point)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        g0 = self.c[0]
        K = self.order
        derivs = []
        coef = 1.0
        for n in range(K + 1):
            derivs.append(coef * g0 ** (p - n))
            coef *= p - n
        return self.compose(derivs)

    # composition
    def compose(self, derivs) -> "Jet":
        """F(self) given ``derivs[n] = F^{(n)}(value)`` for n = 0..order."""
        h = Jet(self.basis, self.c.copy(), self.point)
        h.c[0] = 0.0
        out = np.zeros_like(self.c)
        out[0] = derivs[0]
        power = None
        for n in range(1, self.order + 1):
            power = h if power is None else power * h
            out = out + power.c * (derivs[n] / math.factorial(n))
        return Jet(self.basis, out, self.point)

    def exp(self):
        e = np.exp(self.c[0])
        return self.compose([e] * (self.order + 1))

    def sin(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        cycle = [s, c, -s, -c]
        return self.compose([cycle[n % 4] for n in range(self.order + 1)])

    def cos(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        cycle = [c, -s, -c, s]
        return self.compose([cycle[n % 4] for n in range(self.order + 1)])

    def sqrt(self):
        return self ** 0.5

    def reciprocal(self):
        g0 = self.c[0]
        derivs = []
        for n in range(self.order + 1):
            derivs.append((-1) ** n * math.factorial(n) / g0 ** (n + 1))
        return self.compose(derivs)

    # calculus
    def derivative(self, i: int) -> "Jet":
        if self.order < 1:
            raise OrderExhausted("cannot differentiate a jet of order 0")
        src, fac = self.basis.deriv_plan(i)
        lower = basis(self.basis.nvars, self.order - 1)
        shape = (-1,) + (1,) * (self.c.ndim - 1)
        return Jet(lower, self.c[src] * fac.reshape(shape), self.point)

    def times_coordinate(self, i: int) -> "Jet":
        """The jet of x_i * f."""
        c = self.c * self.point[i]
        dst, src = self.basis.shift_plan(i)
        if dst.size:
            c[dst] += self.c[src]
        return Jet(self.basis, c, self.point)

    def masked(self, keep: np.ndarray) -> "Jet":
        """Zero every coefficient where ``keep`` is false."""
        return Jet(self.basis, np.where(keep, self.c, 0.0), self.point)
