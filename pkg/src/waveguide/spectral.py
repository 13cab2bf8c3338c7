"""Eigenfunction expansion on the interval base [a, b].

The Laplacian on an interval has closed-form eigenpairs, so nothing here is
solved numerically.  Projection uses the composite trapezoid rule on a
uniform grid, which integrates products of the retained cosines (or sines)
exactly once the grid has at least J + 1 intervals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BC(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class BaseInterval:
    a: float
    b: float
    bc: BC = BC.NEUMANN

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        object.__setattr__(self, "bc", BC(self.bc))

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class ModeSpectrum:
    """Eigenvalues ``lambdas`` (square roots of the Laplacian eigenvalues)
    and normalization constants of the first ``J`` modes.

    Modes are indexed from 1, as in ``e_1, e_2, ...``.  The record is plain
    data: a spectrum computed elsewhere can be passed in directly.
    """

    base: BaseInterval
    J: int
    lambdas: np.ndarray
    norm_constants: np.ndarray
    wavenumbers: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("lambdas", "norm_constants", "wavenumbers"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def bc(self) -> BC:
        return self.base.bc


@dataclass(frozen=True)
class YGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def trapezoid(cls, base: BaseInterval, n_points: int) -> "YGrid":
        if n_points < 2:
            raise ValueError("trapezoid grid needs at least 2 points")
        nodes = np.linspace(base.a, base.b, n_points)
        h = base.length / (n_points - 1)
        weights = np.full(n_points, h)
        weights[[0, -1]] = h / 2
        return cls(nodes, weights)

    @classmethod
    def for_spectrum(cls, spec: ModeSpectrum, factor: int = 2) -> "YGrid":
        """Trapezoid grid resolving products of modes up to index ``factor*J``."""
        return cls.trapezoid(spec.base, factor * spec.J + 2)

    def __len__(self) -> int:
        return self.nodes.size


def build_spectrum(base: BaseInterval, J: int) -> ModeSpectrum:
    if J < 1:
        raise ValueError(f"need at least one mode, got J={J}")
    L = base.length
    j = np.arange(1, J + 1)
    if base.bc is BC.NEUMANN:
        k = j - 1
        norms = np.where(k == 0, 1.0 / np.sqrt(L), np.sqrt(2.0 / L))
    else:
        k = j
        norms = np.full(J, np.sqrt(2.0 / L))
    lambdas = k * np.pi / L
    return ModeSpectrum(base, J, lambdas, norms, k.astype(float))


def _check_index(spec: ModeSpectrum, j: int) -> None:
    if not 1 <= j <= spec.J:
        raise ValueError(f"mode index {j} outside 1..{spec.J}")


def _phase(spec: ModeSpectrum, y: np.ndarray) -> np.ndarray:
    # shape (J, n): k_j * (y - a) / L, in units of pi
    y = np.asarray(y, dtype=float)
    return np.multiply.outer(spec.wavenumbers, (y - spec.base.a) / spec.base.length)


def _reduce(s):
    # s mod 2 folded into [-1, 1]
    return s - 2.0 * np.round(s / 2.0)


def sinpi(s):
    """sin(pi s), exactly zero at integer s."""
    r = _reduce(np.asarray(s, dtype=float))
    r = np.where(r > 0.5, 1.0 - r, np.where(r < -0.5, -1.0 - r, r))
    return np.sin(np.pi * r)


def cospi(s):
    """cos(pi s), exactly zero at half-integer s."""
    return sinpi(np.asarray(s, dtype=float) + 0.5)


def mode_matrix(spec: ModeSpectrum, y) -> np.ndarray:
    """Values e_j(y) for all modes, shape (J, len(y))."""
    ph = _phase(spec, y)
    if spec.bc is BC.NEUMANN:
        return spec.norm_constants[:, None] * cospi(ph)
    return spec.norm_constants[:, None] * sinpi(ph)


def mode_derivative_matrix(spec: ModeSpectrum, y) -> np.ndarray:
    """Values of e_j'(y), shape (J, len(y))."""
    ph = _phase(spec, y)
    scale = (spec.norm_constants * spec.lambdas)[:, None]
    if spec.bc is BC.NEUMANN:
        return -scale * sinpi(ph)
    return scale * cospi(ph)


def eigenfunction_values(spec: ModeSpectrum, j: int, grid: YGrid) -> np.ndarray:
    _check_index(spec, j)
    return mode_matrix(spec, grid.nodes)[j - 1]


def _check_grid(spec: ModeSpectrum, grid: YGrid) -> None:
    a, b = spec.base.a, spec.base.b
    tol = 1e-12 * spec.base.length
    if abs(grid.nodes[0] - a) > tol or abs(grid.nodes[-1] - b) > tol:
        raise ValueError("grid does not span the base interval of the spectrum")
    if abs(grid.weights.sum() - spec.base.length) > 1e-12 * spec.base.length:
        raise ValueError("grid weights do not sum to the interval length")


def project(h, spec: ModeSpectrum, grid: YGrid) -> np.ndarray:
    """Mode coefficients c_j = sum_n w_n h(y_n) e_j(y_n).

    The y axis is the last axis of ``h``; leading axes (a radial grid, say)
    are carried through.
    """
    h = np.asarray(h, dtype=float)
    _check_grid(spec, grid)
    if h.shape[-1] != len(grid):
        raise ValueError(f"sampled function has {h.shape[-1]} values, grid has {len(grid)}")
    E = mode_matrix(spec, grid.nodes) * grid.weights
    return h @ E.T


def reconstruct(c, spec: ModeSpectrum, grid: YGrid) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != spec.J:
        raise ValueError(f"expected {spec.J} coefficients, got {c.shape[-1]}")
    return c @ mode_matrix(spec, grid.nodes)


def gram_matrix(spec: ModeSpectrum, grid: YGrid) -> np.ndarray:
    E = mode_matrix(spec, grid.nodes)
    return (E * grid.weights) @ E.T


def plancherel_defect(h, spec: ModeSpectrum, grid: YGrid) -> float:
    """Relative gap between the quadrature norm of ``h`` and the retained
    coefficient energy.  Zero for ``h == 0``."""
    h = np.asarray(h, dtype=float)
    norm2 = float(np.sum(grid.weights * h * h))
    if norm2 == 0.0:
        return 0.0
    c = project(h, spec, grid)
    return abs(norm2 - float(np.sum(c * c))) / norm2


def weyl_check(spec: ModeSpectrum) -> dict:
    """Deviation of lambda_j * L / (k_j pi) from 1 over the nonzero modes."""
    if spec.J < 3:
        raise ValueError("Weyl check needs J >= 3")
    L = spec.base.length
    j = np.arange(1, spec.J + 1)
    index = j - 1 if spec.bc is BC.NEUMANN else j
    keep = index > 0
    ratios = spec.lambdas[keep] * L / (index[keep] * np.pi)
    return {
        "bc": spec.bc.value,
        "modes_checked": int(keep.sum()),
        "max_deviation": float(np.max(np.abs(ratios - 1.0))),
    }
