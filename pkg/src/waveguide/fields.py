"""Manufactured space-time fields with exact derivative jets.

Fields are closed-form expressions in the jet variables ``(t, x1, x2, x3)``
(and ``y`` for waveguide fields).  Vector-field letters act on jets as first
order operators with polynomial coefficients, so words of letters are exact
up to floating point.  A finite-difference evaluator of the same words is
kept as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .jets import Jet, OrderExhausted
from .profiles import poly_bump, smoothstep

PARTIALS = ("dt", "d1", "d2", "d3")
SPATIAL = ("d1", "d2", "d3")
ROTATIONS = ("O12", "O13", "O23")
BOOSTS = ("O01", "O02", "O03")
GAMMA = PARTIALS + ROTATIONS + BOOSTS
Z_LETTERS = PARTIALS + ROTATIONS
SPATIAL_Z = SPATIAL + ROTATIONS
GAMMA_TILDE = GAMMA + ("dy",)
LETTERS = GAMMA_TILDE

MAX_FIELD_ORDER = 6


class SupportOverflow(ValueError):
    """The field's support does not fit inside the quadrature grid."""


def words(alphabet, max_len: int) -> list:
    """All words over ``alphabet`` of length 0..max_len, shortest first."""
    out = [()]
    level = [()]
    for _ in range(max_len):
        level = [w + (a,) for w in level for a in alphabet]
        out.extend(level)
    return out


def japanese(s):
    return np.sqrt(1.0 + np.asarray(s, dtype=float) ** 2)


def letter_coefficients(letter: str, point: np.ndarray) -> dict:
    """The letter as sum_m coeff_m * d/dz_m, variables 0=t, 1..3=x, 4=y."""
    if letter == "dt":
        return {0: 1.0}
    if letter in SPATIAL:
        return {int(letter[1]): 1.0}
    if letter == "dy":
        if point.shape[0] < 5:
            raise ValueError("d_y applies only to waveguide fields")
        return {4: 1.0}
    if letter in ROTATIONS:
        i, j = int(letter[1]), int(letter[2])
        return {j: point[i], i: -point[j]}
    if letter in BOOSTS:
        k = int(letter[2])
        return {0: point[k], k: point[0]}
    raise ValueError(f"unknown letter {letter!r}")


def apply_letter(jet: Jet, letter: str) -> Jet:
    if letter == "dt":
        return jet.derivative(0)
    if letter in SPATIAL:
        return jet.derivative(int(letter[1]))
    if letter == "dy":
        if jet.basis.nvars < 5:
            raise ValueError("d_y applies only to waveguide fields")
        return jet.derivative(4)
    if letter in ROTATIONS:
        i, j = int(letter[1]), int(letter[2])
        return jet.derivative(j).times_coordinate(i) - jet.derivative(i).times_coordinate(j)
    if letter in BOOSTS:
        k = int(letter[2])
        return jet.derivative(0).times_coordinate(k) + jet.derivative(k).times_coordinate(0)
    raise ValueError(f"unknown letter {letter!r}")


def apply_word_jet(jet: Jet, word) -> Jet:
    """Apply letters in sequence, first letter first."""
    if len(word) > jet.order:
        raise OrderExhausted(f"word of length {len(word)} needs jet order >= {len(word)}, have {jet.order}")
    for letter in word:
        jet = apply_letter(jet, letter)
    return jet


@dataclass(frozen=True)
class FieldJet:
    """A closed-form field together with a pending vector-field word.

    ``expression`` maps jet variables ``(t, x1, x2, x3[, y])`` to a jet.
    ``order`` is the jet order still available after ``word`` has been
    applied.  ``support`` maps t to a radius outside which the field
    vanishes (``None`` for unbounded support).
    """

    name: str
    expression: Callable = field(repr=False, compare=False)
    order: int = 3
    support: Callable | None = field(default=None, repr=False, compare=False)
    kind: str = "general"
    has_y: bool = False
    word: tuple = ()
    params: dict = field(default_factory=dict, compare=False)
    focus: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("radial", "general"):
            raise ValueError(f"kind must be radial or general, got {self.kind!r}")
        if self.order + len(self.word) > MAX_FIELD_ORDER:
            raise OrderExhausted(
                f"jet order {self.order} plus word length {len(self.word)} exceeds {MAX_FIELD_ORDER}"
            )

    @property
    def nvars(self) -> int:
        return 5 if self.has_y else 4

    def support_radius(self, t: float) -> float:
        return math.inf if self.support is None else float(self.support(t))

    def focus_at(self, t: float):
        """(center, radius, feature length) of the region that matters at t."""
        if self.focus is not None:
            c, radius, feature = self.focus(t)
            return tuple(float(v) for v in c), float(radius), float(feature)
        reach = self.support_radius(t)
        if not math.isfinite(reach):
            raise ValueError(f"{self.name} has unbounded support and no focus region")
        return (0.0, 0.0, 0.0), reach, reach / 16

    def _point(self, t, x, y=None):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape[1:])
        rows = [tt, x[0], x[1], x[2]]
        if self.has_y:
            if y is None:
                raise ValueError(f"field {self.name} needs y coordinates")
            rows.append(np.broadcast_to(np.asarray(y, dtype=float), x.shape[1:]))
        return np.array(rows)

    def jet(self, t, x, y=None, order: int | None = None) -> Jet:
        """Jet of the field (with its word applied) at points ``x`` (3, P)."""
        order = self.order if order is None else order
        if order > self.order:
            raise OrderExhausted(f"requested order {order} exceeds available {self.order} for {self.name}")
        point = self._point(t, x, y)
        variables = Jet.variables(order + len(self.word), point)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = self.expression(*variables)
        return apply_word_jet(base, self.word)

    def values(self, t, x, y=None) -> np.ndarray:
        return self.jet(t, x, y, order=0).value

    def with_order(self, order: int) -> "FieldJet":
        return replace(self, order=order)

    def scaled(self, c: float) -> "FieldJet":
        expr = self.expression
        return replace(self, name=f"{c:g}*{self.name}", expression=lambda *v: expr(*v) * c)


def apply_word(word, f: FieldJet) -> FieldJet:
    """The field Gamma^word f, letters applied first to last.

    Each letter consumes one jet order; running out raises
    :class:`OrderExhausted`.
    """
    word = tuple(word)
    for letter in word:
        if letter not in LETTERS:
            raise ValueError(f"unknown letter {letter!r}")
        if letter == "dy" and not f.has_y:
            raise ValueError("d_y applies only to waveguide fields")
    if len(word) > f.order:
        raise OrderExhausted(f"word of length {len(word)} exceeds jet order {f.order} of {f.name}")
    kind = f.kind
    if any(letter in SPATIAL or letter in BOOSTS for letter in word):
        kind = "general"
    name = f.name if not word else f"{'.'.join(reversed(word))}({f.name})"
    return replace(f, name=name, order=f.order - len(word), word=f.word + word, kind=kind)


def _norm2(X, center):
    return sum((Xi - ci) * (Xi - ci) for Xi, ci in zip(X, center))


# Gaussian factors are below 1e-8 of their peak beyond this many widths,
# which is where the pointwise checks stop resolving the field anyway
_FOCUS = 4.5


def _tail_radius(width):
    # exp(-s^2) < 1e-18 beyond s = 6.5
    return 6.5 * width


def gaussian_bump(center=(0.0, 0.0, 0.0), width=1.0, amplitude=1.0, omega=0.0, time_cutoff=None, order=3):
    """A exp(-|x-c|^2/width^2), optionally times cos(omega t) and a smooth
    switch-off in t that is 1 before ``time_cutoff[0]`` and 0 after
    ``time_cutoff[1]``."""
    center = tuple(float(c) for c in center)
    step = smoothstep(4)

    def expr(T, X1, X2, X3):
        w = (_norm2((X1, X2, X3), center) * (-1.0 / width**2)).exp() * amplitude
        if omega:
            w = w * (T * omega).cos()
        if time_cutoff is not None:
            t_on, t_off = time_cutoff
            w = w * step.jet((T - t_off) * (-1.0 / (t_off - t_on)))
        return w

    reach = math.hypot(*center) + _tail_radius(width)
    radial = all(c == 0.0 for c in center)
    return FieldJet(
        "gaussian_bump", expr, order, lambda t: reach, "radial" if radial else "general",
        params=dict(center=center, width=width, amplitude=amplitude, omega=omega, time_cutoff=time_cutoff),
        focus=lambda t: (center, _FOCUS * width, width / 2),
    )


def smoothed_outgoing(width=1.0, delay=0.0, amplitude=1.0, m=8, order=3):
    """Exact radial wave [psi(r - t + delay) - psi(-r - t + delay)] / r with
    psi the compact bump (1 - (s/width)^2)^m; for t > delay + width it is
    f(t - r)/r with f compactly supported."""
    psi = poly_bump(m)

    def expr(T, X1, X2, X3):
        R = (X1 * X1 + X2 * X2 + X3 * X3).sqrt()
        shift = delay - T
        a = psi.jet((R + shift) * (1.0 / width))
        b = psi.jet((-R + shift) * (1.0 / width))
        return (a - b) * R.reciprocal() * amplitude

    return FieldJet(
        "smoothed_outgoing", expr, order, lambda t: width + abs(t - delay), "radial",
        params=dict(width=width, delay=delay, amplitude=amplitude, m=m),
        focus=lambda t: ((0.0, 0.0, 0.0), width + abs(t - delay), width / 4),
    )


def plane_packet(direction=(1.0, 0.0, 0.0), wavenumber=2.0, width=1.0, offset=(0.0, 0.0, 0.0), amplitude=1.0, order=3):
    """cos(k (d.x - t)) under a Gaussian envelope moving with velocity d."""
    d = np.asarray(direction, dtype=float)
    d = tuple(d / np.linalg.norm(d))
    offset = tuple(float(c) for c in offset)

    def expr(T, X1, X2, X3):
        X = (X1, X2, X3)
        phase = (sum(di * Xi for di, Xi in zip(d, X)) - T) * wavenumber
        env = sum((Xi - oi - T * di) * (Xi - oi - T * di) for Xi, oi, di in zip(X, offset, d))
        return phase.cos() * (env * (-1.0 / width**2)).exp() * amplitude

    reach = math.hypot(*offset) + _tail_radius(width)
    feature = min(width / 2, math.pi / (2 * wavenumber))
    return FieldJet(
        "plane_packet", expr, order, lambda t: reach + abs(t), "general",
        params=dict(direction=d, wavenumber=wavenumber, width=width, offset=offset, amplitude=amplitude),
        focus=lambda t: (tuple(o + t * di for o, di in zip(offset, d)), _FOCUS * width, feature),
    )


def static_bump(center=(0.0, 0.0, 0.0), radius=1.0, plateau=0.5, amplitude=1.0, order=3):
    """Time-independent flat-top bump: ``amplitude`` on |x-c| <= plateau*radius,
    zero beyond ``radius``, C^4 smooth step in between."""
    center = tuple(float(c) for c in center)
    step = smoothstep(4)
    inner = plateau * radius

    def expr(T, X1, X2, X3):
        q = _norm2((X1, X2, X3), center)
        flat = q.value <= inner**2
        # keep sqrt away from its branch point inside the plateau
        q = q + np.where(flat, radius**2, 0.0)
        rho = q.sqrt()
        w = step.jet((rho - radius) * (-1.0 / (radius - inner))) * amplitude
        c = np.where(flat, 0.0, w.c)
        c[0] = np.where(flat, amplitude, c[0])
        return Jet(w.basis, c, w.point)

    radial = all(c == 0.0 for c in center)
    reach = math.hypot(*center) + radius
    return FieldJet(
        "static_bump", expr, order, lambda t: reach, "radial" if radial else "general",
        params=dict(center=center, radius=radius, plateau=plateau, amplitude=amplitude),
        focus=lambda t: (center, radius, (radius - inner) / 3),
    )


def kg_free_mode(mu=1.0, xi=(1.0, 0.0, 0.0), amplitude=1.0, order=3):
    """cos(omega t) cos(xi.x) with omega^2 = mu^2 + |xi|^2."""
    xi = tuple(float(c) for c in xi)
    omega = math.sqrt(mu**2 + sum(c * c for c in xi))

    def expr(T, X1, X2, X3):
        phase = sum(k * Xi for k, Xi in zip(xi, (X1, X2, X3)))
        if not isinstance(phase, Jet):
            phase = X1 * 0.0
        return (T * omega).cos() * phase.cos() * amplitude

    radial = all(c == 0.0 for c in xi)
    return FieldJet(
        "kg_free_mode", expr, order, None, "radial" if radial else "general",
        params=dict(mu=mu, xi=xi, amplitude=amplitude, omega=omega),
    )


def waveguide_mode(a=0.0, b=math.pi, k=1, width=1.0, bc="neumann", amplitude=1.0, order=3):
    """Gaussian in x times the k-th interval eigenfunction profile in y."""
    L = b - a

    def expr(T, X1, X2, X3, Y):
        env = ((X1 * X1 + X2 * X2 + X3 * X3) * (-1.0 / width**2)).exp()
        arg = (Y - a) * (k * math.pi / L)
        prof = arg.cos() if bc == "neumann" else arg.sin()
        return env * prof * amplitude

    return FieldJet(
        "waveguide_mode", expr, order, lambda t: _tail_radius(width), "radial", has_y=True,
        params=dict(a=a, b=b, k=k, width=width, bc=bc, amplitude=amplitude),
    )


def from_expression(name, expression, order=3, support=None, kind="general", has_y=False):
    return FieldJet(name, expression, order, support, kind, has_y)


CATALOG = {
    "gaussian_bump": gaussian_bump,
    "smoothed_outgoing": smoothed_outgoing,
    "plane_packet": plane_packet,
    "static_bump": static_bump,
    "kg_free_mode": kg_free_mode,
    "waveguide_mode": waveguide_mode,
}


def catalog_field(name: str, **params) -> FieldJet:
    try:
        make = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; choose from {sorted(CATALOG)}") from None
    return make(**params)


def corpus(order: int = 4) -> list:
    """Compactly supported fields used by the inequality suite (22 members)."""
    f = []
    for width in (0.7, 1.0, 1.5):
        f.append(gaussian_bump(width=width, order=order))
    f.append(gaussian_bump(center=(1.0, 0.5, 0.0), width=0.8, order=order))
    f.append(gaussian_bump(center=(0.0, -1.0, 1.0), width=1.2, omega=1.5, order=order))
    f.append(gaussian_bump(width=1.0, time_cutoff=(1.0, 4.0), order=order))
    f.append(gaussian_bump(center=(0.5, 0.0, 0.0), width=0.9, omega=0.7, time_cutoff=(2.0, 5.0), order=order))
    for width, delay in ((1.0, 0.0), (1.5, 0.0), (1.0, -2.0), (2.0, 1.0)):
        f.append(smoothed_outgoing(width=width, delay=delay, order=order))
    f.append(smoothed_outgoing(width=1.0, delay=0.0, m=10, order=order))
    f.append(smoothed_outgoing(width=0.7, delay=0.5, order=order))
    for d, k in (((1, 0, 0), 2.0), ((0, 1, 1), 1.0), ((1, 1, 1), 3.0)):
        f.append(plane_packet(direction=d, wavenumber=k, order=order))
    f.append(plane_packet(direction=(1, -1, 0), wavenumber=1.5, width=1.5, offset=(0.5, 0, 0), order=order))
    for radius, plateau in ((1.5, 0.5), (2.0, 0.3), (3.0, 0.6)):
        f.append(static_bump(radius=radius, plateau=plateau, order=order))
    f.append(static_bump(center=(0.5, 0.5, 0.0), radius=2.0, order=order))
    f.append(static_bump(center=(0.0, 0.0, -1.0), radius=1.5, plateau=0.2, order=order))
    return f


# quadrature grids


def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class SpaceGrid3:
    """Quadrature on R^3.

    ``radial``: midpoint nodes on [0, R] with weight r^2 dr, times a product
    angular rule (Gauss-Legendre in cos(theta), uniform in phi).  With one
    angular node the rule is the pure radial 4 pi r^2 dr quadrature along the
    x1 axis.  ``cartesian``: cell centers of the box center + [-R, R]^3.
    """

    mode: str
    extent: float
    n: int
    n_theta: int = 1
    n_phi: int = 1
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.mode not in ("radial", "cartesian"):
            raise ValueError(f"grid mode must be radial or cartesian, got {self.mode!r}")
        if self.extent <= 0 or self.n < 2:
            raise ValueError("grid needs positive extent and at least 2 nodes")

    @classmethod
    def radial(cls, R, n, n_theta=1, n_phi=1):
        return cls("radial", float(R), int(n), int(n_theta), int(n_phi))

    @classmethod
    def cartesian(cls, half_width, n, center=(0.0, 0.0, 0.0)):
        return cls("cartesian", float(half_width), int(n), center=tuple(float(c) for c in center))

    @property
    def spacing(self) -> float:
        if self.mode == "radial":
            return self.extent / self.n
        return 2 * self.extent / self.n

    def refined(self) -> "SpaceGrid3":
        """Grid with half the spacing (angular rule refined by 3/2)."""
        if self.mode == "radial":
            grow = lambda k: k if k == 1 else (3 * k + 1) // 2
            return replace(self, n=2 * self.n, n_theta=grow(self.n_theta), n_phi=grow(self.n_phi))
        return replace(self, n=2 * self.n)

    @cached_property
    def _nodes(self):
        if self.mode == "radial":
            h = self.extent / self.n
            r = (np.arange(self.n) + 0.5) * h
            mu, wmu = _gauss_legendre(self.n_theta) if self.n_theta > 1 else (np.zeros(1), np.full(1, 2.0))
            phi = (np.arange(self.n_phi) + 0.5) * 2 * np.pi / self.n_phi if self.n_phi > 1 else np.zeros(1)
            wphi = 2 * np.pi / self.n_phi
            sin_t = np.sqrt(1 - mu**2)
            dirs = np.stack(
                [np.outer(sin_t, np.cos(phi)).ravel(), np.outer(sin_t, np.sin(phi)).ravel(), np.repeat(mu, phi.size)]
            )
            wang = np.repeat(wmu, phi.size) * wphi
            x = (r[None, :, None] * dirs[:, None, :]).reshape(3, -1)
            w = (r[:, None] ** 2 * h * wang[None, :]).ravel()
        else:
            h = 2 * self.extent / self.n
            c = -self.extent + (np.arange(self.n) + 0.5) * h
            X = np.meshgrid(c, c, c, indexing="ij")
            x = np.stack([g.ravel() for g in X]) + np.array(self.center)[:, None]
            w = np.full(x.shape[1], h**3)
        x.setflags(write=False)
        w.setflags(write=False)
        return x, w

    @property
    def points(self) -> np.ndarray:
        return self._nodes[0]

    @property
    def weights(self) -> np.ndarray:
        return self._nodes[1]

    def __len__(self):
        return self.weights.size

    def chunks(self, size: int = 16384):
        x, w = self._nodes
        for s in range(0, w.size, size):
            yield x[:, s : s + size], w[s : s + size]

    def check_support(self, f: FieldJet, t: float) -> None:
        reach = f.support_radius(t)
        if reach > self.extent - math.hypot(*self.center):
            raise SupportOverflow(f"{f.name} at t={t:g} reaches radius {reach:g} beyond grid extent {self.extent:g}")

    def describe(self) -> dict:
        out = dict(mode=self.mode, extent=self.extent, n=self.n, n_theta=self.n_theta, n_phi=self.n_phi)
        if any(self.center):
            out["center"] = list(self.center)
        return out


def sampling_grid(f: FieldJet, t: float, refine: int = 0) -> SpaceGrid3:
    """Grid covering the region where ``f`` is non-negligible at time t, with
    spacing set by the field's feature length: a ball for radial fields
    centered at the origin, a box otherwise.  Used for pointwise maxima,
    which are then polished by local search."""
    center, radius, feature = f.focus_at(t)
    if f.kind == "radial" and not np.any(center):
        n = max(16, int(math.ceil(4 * radius / feature))) * 2**refine
        return SpaceGrid3.radial(radius, n, 6 * 2**refine, 12 * 2**refine)
    n = max(8, int(math.ceil(2 * radius / feature))) * 2**refine
    return SpaceGrid3.cartesian(radius, n, center)


WEIGHTS = {
    "<r>^1/2": lambda t, r: japanese(r) ** 0.5,
    "<r>": lambda t, r: japanese(r),
    "<r>^1/2<t-r>": lambda t, r: japanese(r) ** 0.5 * japanese(t - r),
    "<t-r>": lambda t, r: japanese(t - r),
    "<t+r>": lambda t, r: japanese(t + r),
}


@dataclass(frozen=True)
class WeightedNormReport:
    l2: float
    sup: float
    weighted_sup: dict
    l2_refined: float | None = None
    grid: dict = field(default_factory=dict)

    @property
    def refinement_change(self) -> float | None:
        if self.l2_refined is None:
            return None
        if self.l2_refined == 0.0:
            return 0.0
        return abs(self.l2 - self.l2_refined) / self.l2_refined


def _norm_pass(f, t, grid):
    sq = 0.0
    sup = 0.0
    wsup = dict.fromkeys(WEIGHTS, 0.0)
    for x, w in grid.chunks():
        v = np.abs(f.values(t, x))
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"{f.name} produced non-finite values at t={t:g}")
        r = np.sqrt(np.sum(x * x, axis=0))
        sq += float(np.sum(w * v * v))
        sup = max(sup, float(v.max(initial=0.0)))
        for key, weight in WEIGHTS.items():
            wsup[key] = max(wsup[key], float(np.max(weight(t, r) * v, initial=0.0)))
    return math.sqrt(sq), sup, wsup


def weighted_norms(f: FieldJet, t: float, grid: SpaceGrid3, refine: bool = True) -> WeightedNormReport:
    """L2 norm, sup, and weighted sups of f(t, .) on ``grid``.

    With ``refine`` the L2 norm is recomputed on the refined grid so the
    quadrature error can be judged from the report.
    """
    if f.has_y:
        raise ValueError("weighted_norms acts on R^3 fields; project waveguide fields first")
    grid.check_support(f, t)
    l2, sup, wsup = _norm_pass(f, t, grid)
    l2_ref = None
    if refine:
        fine = grid.refined()
        l2_ref = _norm_pass(f, t, fine)[0]
    return WeightedNormReport(l2, sup, wsup, l2_ref, grid.describe())


def radial_boost_norm_identity(f: FieldJet, t: float, grid: SpaceGrid3 | None = None) -> dict:
    """Compare sum_k ||Omega_0k f||^2 with ||(t d_r + r d_t) f||^2."""
    if f.kind != "radial":
        raise ValueError(f"{f.name} is not radial")
    if grid is None:
        grid = SpaceGrid3.radial(f.support_radius(t) * 1.05 + 1.0, 800)
    grid.check_support(f, t)
    lhs = 0.0
    rhs = 0.0
    for x, w in grid.chunks():
        jet = f.jet(t, x, order=1)
        r = np.sqrt(np.sum(x * x, axis=0))
        grad = np.array([jet.partial(e) for e in ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))])
        ft = jet.partial((1, 0, 0, 0))
        boosts = x * ft + t * grad
        lhs += float(np.sum(w * np.sum(boosts**2, axis=0)))
        dr = np.sum(x * grad, axis=0) / r
        rhs += float(np.sum(w * (t * dr + r * ft) ** 2))
    scale = max(lhs, rhs)
    rel = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
    return dict(field=f.name, t=t, boosts_sq=lhs, radial_boost_sq=rhs, relative_difference=rel, grid=grid.describe())


# finite-difference oracle


def _fd_partial(g, point, var, h):
    def central(step):
        up = point.copy()
        dn = point.copy()
        up[var] += step
        dn[var] -= step
        return (g(up) - g(dn)) / (2 * step)

    d1, d2, d3 = central(h), central(h / 2), central(h / 4)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d3 - d2) / 3
    return (16 * r2 - r1) / 15


def fd_word(f: FieldJet, word, t, x, y=None, h: float = 1e-3) -> np.ndarray:
    """Gamma^word f by nested Richardson-extrapolated central differences.

    Independent of the jet machinery except for point values of the
    underlying expression.
    """
    base = replace(f, word=(), order=0)
    point = base._point(t, x, y).astype(float)

    def evaluate(level, p):
        if level == 0:
            return base.jet(p[0], p[1:4], p[4] if base.has_y else None, order=0).value
        letter = tuple(f.word + tuple(word))[level - 1]
        out = 0.0
        for var, coeff in letter_coefficients(letter, p).items():
            out = out + coeff * _fd_partial(lambda q: evaluate(level - 1, q), p, var, h)
        return out

    return evaluate(len(f.word) + len(word), point)
