"""Quadratic nonlinearities Q(du, d^2u) on the waveguide and the Neumann
compatibility check for their quasilinear part.

Index convention: 0 = t, 1..3 = x, 4 = y.  ``B[j, k, l]`` multiplies
``d_l u * d_j d_k u`` and ``R[l, m]`` multiplies ``d_l u * d_m u``.  Only the
part of ``B`` symmetric in (j, k) reaches the equation, so it is stored
symmetrized; ``R`` likewise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

T, Y = 0, 4
SPACE = (1, 2, 3)
COMPAT_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Nonlinearity:
    B: np.ndarray = field(default_factory=lambda: np.zeros((5, 5, 5)))
    R: np.ndarray = field(default_factory=lambda: np.zeros((5, 5)))
    name: str = "custom"
    raw_B: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if B.shape != (5, 5, 5) or R.shape != (5, 5):
            raise ValueError("B must have shape (5, 5, 5) and R shape (5, 5)")
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(R))):
            raise ValueError("nonlinearity coefficients must be finite")
        object.__setattr__(self, "raw_B", _frozen(B))
        object.__setattr__(self, "B", _frozen(0.5 * (B + B.transpose(1, 0, 2))))
        object.__setattr__(self, "R", _frozen(0.5 * (R + R.T)))

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.B) or np.any(self.R))

    @property
    def quasilinear(self) -> bool:
        return bool(np.any(self.B))

    @property
    def has_y_quasilinear(self) -> bool:
        """True when some second derivative involving y has a coefficient."""
        return bool(np.any(self.B[Y]) or np.any(self.B[:, Y]))

    @property
    def rotation_invariant(self) -> bool:
        """Invariance of B and R under rotations of the x indices, tested on
        a fixed generic rotation and a coordinate permutation."""
        return all(_invariant(self, q) for q in _test_rotations())

    def scaled(self, c: float) -> "Nonlinearity":
        return Nonlinearity(c * self.B, c * self.R, name=f"{c:g}*{self.name}")

    def __add__(self, other: "Nonlinearity") -> "Nonlinearity":
        return Nonlinearity(self.B + other.B, self.R + other.R, name=f"{self.name}+{other.name}")

    def evaluate(self, d, H=None):
        """Q at points with first derivatives ``d`` (5, ...) and second
        derivatives ``H`` (5, 5, ...); ``H`` may be omitted when B = 0."""
        out = np.zeros(np.shape(d)[1:])
        for (l, m), c in self._r_terms:
            out += c * d[l] * d[m]
        if self._b_terms and H is None:
            raise ValueError("quasilinear nonlinearity needs second derivatives")
        for (j, k, l), c in self._b_terms:
            out += c * d[l] * H[j, k]
        return out

    @property
    def _r_terms(self):
        return [(idx, float(self.R[idx])) for idx in zip(*np.nonzero(self.R))]

    @property
    def _b_terms(self):
        return [(idx, float(self.B[idx])) for idx in zip(*np.nonzero(self.B))]

    def dtt_coefficient(self, d):
        """Sum_l B[0, 0, l] d_l u, the coefficient of d_t^2 u inside Q."""
        return np.einsum("l,l...->...", self.B[T, T], d)


def _test_rotations():
    c, s = np.cos(0.7), np.sin(0.7)
    q1 = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    c, s = np.cos(1.3), np.sin(1.3)
    q2 = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    perm = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    return q1 @ q2, perm


def _invariant(nl: Nonlinearity, q) -> bool:
    P = np.eye(5)
    P[1:4, 1:4] = q
    B2 = np.einsum("aj,bk,cl,jkl->abc", P, P, P, nl.B)
    R2 = np.einsum("al,bm,lm->ab", P, P, nl.R)
    scale = max(np.abs(nl.B).max(), np.abs(nl.R).max(), 1.0)
    return np.allclose(B2, nl.B, atol=1e-12 * scale) and np.allclose(R2, nl.R, atol=1e-12 * scale)


# presets


def _term_B(entries):
    B = np.zeros((5, 5, 5))
    for (j, k, l), v in entries.items():
        B[j, k, l] += v
        if j != k:
            B[k, j, l] += v
    return B


def _term_R(entries):
    R = np.zeros((5, 5))
    for (l, m), v in entries.items():
        R[l, m] += v
    return R


def preset(name: str, scale: float = 1.0) -> Nonlinearity:
    """Named nonlinearities.

    zero              Q = 0
    john              Q = (d_t u)^2
    null_form         Q = (d_t u)^2 - |grad_x u|^2 - (d_y u)^2
    semilinear_mixed  Q = (d_t u)^2 + d_t u d_y u
    quasi_x           Q = d_t u Lap_x u + d_t u d_t^2 u
    quasi_dt_dtdy     Q = d_t u d_t d_y u
    quasi_dt_dyy      Q = d_t u d_y^2 u
    """
    B = np.zeros((5, 5, 5))
    R = np.zeros((5, 5))
    if name == "zero":
        pass
    elif name == "john":
        R = _term_R({(T, T): 1.0})
    elif name == "null_form":
        R = np.diag([1.0, -1.0, -1.0, -1.0, -1.0])
    elif name == "semilinear_mixed":
        R = _term_R({(T, T): 1.0, (T, Y): 0.5, (Y, T): 0.5})
    elif name == "quasi_x":
        B = _term_B({(i, i, T): 1.0 for i in SPACE} | {(T, T, T): 1.0})
    elif name == "quasi_dt_dtdy":
        # the symmetric pair (0, 4), (4, 0) carries d_t d_y u once
        B = _term_B({(T, Y, T): 0.5})
    elif name == "quasi_dt_dyy":
        B = _term_B({(Y, Y, T): 1.0})
    else:
        raise ValueError(f"unknown nonlinearity preset {name!r}; choose from {PRESETS}")
    return Nonlinearity(scale * B, scale * R, name=name)


PRESETS = ("zero", "john", "null_form", "semilinear_mixed", "quasi_x", "quasi_dt_dtdy", "quasi_dt_dyy")


# Neumann compatibility


@dataclass(frozen=True)
class CompatibilityReport:
    compatible: bool
    closed_form: bool
    sampled: bool
    max_violation: float
    witnesses: list

    @property
    def agree(self) -> bool:
        return self.closed_form == self.sampled


def compatibility_closed_form(B_raw, tol: float = COMPAT_TOL) -> tuple[bool, float]:
    """B^{j4}_l + B^{4j}_l = 0 for all j, l <= 3 (as given, unsymmetrized)."""
    B_raw = np.asarray(B_raw, dtype=float)
    block = B_raw[:4, Y, :4] + B_raw[Y, :4, :4]
    v = float(np.abs(block).max())
    return v <= tol, v


def _sample_X(rng, n_random):
    """Pairs (xi, eta) orthogonal to the y axis: all basis pairs plus random
    combinations, together with both unit normals theta = +-e_4."""
    basis = np.eye(5)[:4]
    pairs = [(basis[i], basis[j]) for i in range(4) for j in range(4)]
    for _ in range(n_random):
        xi = np.zeros(5)
        eta = np.zeros(5)
        xi[:4] = rng.normal(size=4)
        eta[:4] = rng.normal(size=4)
        pairs.append((xi, eta))
    return pairs


def compatibility_sampled(B_sym, n_random: int = 32, seed: int = 0, tol: float = COMPAT_TOL):
    """Evaluate sum B^{jk}_l xi_l eta_j theta_k over sampled points of X.
    Returns (compatible, max |value|, witnesses above tolerance)."""
    B_sym = np.asarray(B_sym, dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    witnesses = []
    for sign in (1.0, -1.0):
        theta = np.zeros(5)
        theta[Y] = sign
        for xi, eta in _sample_X(rng, n_random):
            v = float(np.einsum("jkl,l,j,k->", B_sym, xi, eta, theta))
            worst = max(worst, abs(v))
            if abs(v) > tol:
                witnesses.append({"theta": theta.tolist(), "xi": xi.tolist(), "eta": eta.tolist(), "value": v})
    witnesses.sort(key=lambda w: -abs(w["value"]))
    return not witnesses, worst, witnesses


def check_neumann_compatibility(nl: Nonlinearity, n_random: int = 32, seed: int = 0) -> CompatibilityReport:
    """Both routes: the closed-form coefficient condition on the given B and
    brute-force sampling of the trilinear form over X on the symmetrized B."""
    closed, v_closed = compatibility_closed_form(nl.raw_B)
    sampled, v_sampled, witnesses = compatibility_sampled(nl.B, n_random, seed)
    return CompatibilityReport(
        compatible=closed and sampled,
        closed_form=closed,
        sampled=sampled,
        max_violation=max(v_closed, v_sampled),
        witnesses=witnesses[:5],
    )


def random_coefficient_set(rng) -> np.ndarray:
    """Random quasilinear tensor; about half are built compatible (zero or
    antisymmetric (j4)/(4j) blocks), some carry tiny violations."""
    B = rng.normal(size=(5, 5, 5)) * (rng.random((5, 5, 5)) < 0.4)
    mode = rng.integers(4)
    if mode == 0:
        B[:4, Y, :4] = 0.0
        B[Y, :4, :4] = 0.0
    elif mode == 1:
        A = rng.normal(size=(4, 4))
        B[:4, Y, :4] = A
        B[Y, :4, :4] = -A
    elif mode == 2:
        B[:4, Y, :4] = 0.0
        B[Y, :4, :4] = 0.0
        j, l = rng.integers(4, size=2)
        B[j, Y, l] = 10.0 ** rng.uniform(-9, -3)
    return B


def compatibility_agreement(n_sets: int = 10_000, seed: int = 0) -> dict:
    """Run both checks on random coefficient sets and count disagreements."""
    rng = np.random.default_rng(seed)
    disagree = []
    compatible = 0
    for i in range(n_sets):
        nl = Nonlinearity(random_coefficient_set(rng))
        closed, _ = compatibility_closed_form(nl.raw_B)
        sampled, _, _ = compatibility_sampled(nl.B, n_random=4, seed=i)
        compatible += closed
        if closed != sampled:
            disagree.append(i)
    return {"sets": n_sets, "compatible": compatible, "disagreements": len(disagree), "indices": disagree[:10]}


def canonical_examples() -> dict:
    """The three reference cases: all-x quasilinear terms, d_t u d_t d_y u and
    d_t u d_y^2 u."""
    out = {}
    for name in ("quasi_x", "quasi_dt_dtdy", "quasi_dt_dyy"):
        out[name] = check_neumann_compatibility(preset(name))
    return out


__all__ = [
    "Nonlinearity",
    "preset",
    "PRESETS",
    "CompatibilityReport",
    "check_neumann_compatibility",
    "compatibility_closed_form",
    "compatibility_sampled",
    "compatibility_agreement",
    "canonical_examples",
    "random_coefficient_set",
]
