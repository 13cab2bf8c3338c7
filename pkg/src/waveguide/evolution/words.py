"""Vector-field words on radial waveguide solutions.

For functions radial in x the rotations vanish, the three spatial partials
enter only through d_r (|grad f| = |d_r f|) and the three boosts through
Omega_r = t d_r + r d_t (sum_k ||Omega_0k f||^2 = ||Omega_r f||^2).  The
alphabet is therefore {d_t, d_r, d_y, Omega_r}.

A function is carried as a stack [g, d_t g, d_t^2 g, ...] of mode arrays
together with its parity in r and its y basis: "primary" (the spectrum's
eigenfunctions e_j) or "dual" (e_j' / lambda_j).  Letters act exactly on
the stack; each of d_t and Omega_r consumes one time level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import radial
from .solver import Discretization

LETTERS = ("dt", "dr", "dy", "Or")


@dataclass(frozen=True)
class Stack:
    levels: tuple
    r_parity: float = 1.0
    basis: str = "primary"

    def __len__(self):
        return len(self.levels)


def apply_letter(disc: Discretization, t: float, s: Stack, letter: str) -> Stack:
    if letter == "dt":
        if len(s) < 2:
            raise ValueError("time stack exhausted")
        return Stack(s.levels[1:], s.r_parity, s.basis)
    if letter == "dr":
        return Stack(tuple(radial.d1(g, disc.dr, s.r_parity) for g in s.levels), -s.r_parity, s.basis)
    if letter == "dy":
        lam = disc.spec.lambdas[:, None]
        sign = 1.0 if s.basis == "primary" else -1.0
        other = "dual" if s.basis == "primary" else "primary"
        return Stack(tuple(sign * lam * g for g in s.levels), s.r_parity, other)
    if letter == "Or":
        if len(s) < 2:
            raise ValueError("time stack exhausted")
        gr = [radial.d1(g, disc.dr, s.r_parity) for g in s.levels]
        r = disc.r
        out = []
        for n in range(len(s) - 1):
            v = t * gr[n] + r * s.levels[n + 1]
            if n > 0:
                v = v + n * gr[n - 1]
            out.append(v)
        return Stack(tuple(out), -s.r_parity, s.basis)
    raise ValueError(f"unknown letter {letter!r}")


def apply_word(disc, t, s: Stack, word) -> Stack:
    for letter in word:
        s = apply_letter(disc, t, s, letter)
    return s


def _basis_values(disc: Discretization, basis: str):
    if basis == "primary":
        return disc.E
    lam = disc.spec.lambdas[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lam > 0, disc.dE / np.where(lam > 0, lam, 1.0), 0.0)


def l2(disc: Discretization, s: Stack) -> float:
    g = s.levels[0]
    return math.sqrt(float(np.sum(g * g * disc.rgrid.volume_weights)))


def physical(disc: Discretization, s: Stack):
    return _basis_values(disc, s.basis).T @ s.levels[0]


def derivative_stacks(W, Wt, Wtt, Wttt, disc: Discretization):
    """Stacks of the components d_t w, d_r w, d_y w."""
    dt = Stack((Wt, Wtt, Wttt))
    levels = (W, Wt, Wtt, Wttt)
    dr = Stack(tuple(radial.d1(g, disc.dr, 1.0) for g in levels), -1.0)
    dy = apply_letter(disc, 0.0, Stack(levels), "dy")
    return {"t": dt, "r": dr, "y": dy}


def words(max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(LETTERS, repeat=n)


def word_norms(disc: Discretization, t: float, comps: dict, max_len: int = 2) -> dict:
    """For each word length L <= max_len:
    energy part  sum_{|a| <= L} ||G^a d_{t,x,y} w||_2
    decay part   (1 + t) sum_{|a| <= L} sup |G^a d_{t,x} w|."""
    energy = np.zeros(max_len + 1)
    decay = np.zeros(max_len + 1)
    for word in words(max_len):
        n = len(word)
        sq = 0.0
        sup2 = 0.0
        for name, s in comps.items():
            g = apply_word(disc, t, s, word)
            sq += l2(disc, g) ** 2
            if name != "y":
                sup2 = sup2 + physical(disc, g) ** 2
        energy[n:] += math.sqrt(sq)
        decay[n:] += (1.0 + t) * math.sqrt(float(np.max(sup2)))
    return {"energy": energy, "decay": decay, "total": energy + decay}
