"""Numerical ratio checks for the weighted Sobolev and Klainerman-Sideris
type estimates, the dyadic decay estimates, and the ODE comparison bound.

Every check computes a left-hand side and a right-hand side and reports
their ratio.  The constants in these estimates are not explicit, so the
testable claims are that ratios stay bounded and do not drift under grid
refinement.  Degenerate cases (zero right-hand side, left-hand side killed
by symmetry) are flagged instead of asserted.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import maximum_filter

from .fields import (
    GAMMA,
    PARTIALS,
    SPATIAL_Z,
    Z_LETTERS,
    FieldJet,
    SpaceGrid3,
    apply_letter,
    sampling_grid,
    apply_word_jet,
    japanese,
)
from .jets import OrderExhausted

DEGENERATE_FLOOR = 1e-12
POINTWISE_REL_FLOOR = 1e-8
R_MIN = 1e-2

_D1 = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
_D2 = [(a, b) for a in range(4) for b in range(4)]


class Estimate(str, enum.Enum):
    SOBOLEV1 = "sobolev1"
    SOBOLEV2 = "sobolev2"
    HIDANO1 = "hidano1"
    KS_DELTA = "ks_delta"
    KS_DTDT = "ks_dtdt"
    KS_DTDX = "ks_dtdx"
    DELTA_DRDR = "delta_drdr"
    KS_L2 = "ks_l2"
    WAVE_DECAY = "wave_decay"
    KG_DECAY = "kg_decay"
    ODE_LEMMA = "ode_lemma"
    BASIC_ENERGY = "basic_energy"


@dataclass
class RatioReport:
    estimate: str
    field: str
    t: float
    ratio: float
    rhs_floor: float
    refinement_drift: float
    samples: int
    word: tuple = ()
    lhs: float = math.nan
    rhs: float = math.nan
    regions: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return any(f in ("rhs_degenerate", "lhs_vanishes", "no_samples") for f in self.flags)

    def row(self) -> dict:
        return {
            "estimate": self.estimate,
            "field": self.field,
            "word": ".".join(self.word),
            "t": self.t,
            "ratio": self.ratio,
            "rhs_floor": self.rhs_floor,
            "drift": self.refinement_drift,
            "samples": self.samples,
            "flags": ";".join(self.flags),
        }


# jet helpers


def _grad(jet):
    return np.array([jet.partial(a) for a in _D1])


def _hessian(jet):
    out = []
    for a, b in _D2:
        alpha = [0, 0, 0, 0]
        alpha[a] += 1
        alpha[b] += 1
        out.append(jet.partial(alpha))
    return np.array(out).reshape(4, 4, -1)


def _box(jet):
    h = [jet.partial(a) for a in ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2))]
    return h[0] - h[1] - h[2] - h[3]


def _tree(jets, alphabet, max_len, prefix=()):
    """Depth-first walk over words of length <= max_len; ``jets`` is a tuple
    of jets that every letter is applied to componentwise."""
    yield prefix, jets
    if len(prefix) < max_len:
        for letter in alphabet:
            yield from _tree(tuple(apply_letter(j, letter) for j in jets), alphabet, max_len, prefix + (letter,))


def _need(f: FieldJet, order: int, what: str):
    if f.order < order:
        raise OrderExhausted(f"{what} needs jet order {order}, {f.name} carries {f.order}")


def _check_grid(f, t, grid):
    if f.has_y:
        raise ValueError("the R^3 estimates act on fields without a y variable")
    grid.check_support(f, t)


class _Acc:
    """Accumulates per-word squared L2 norms and pointwise sups over chunks."""

    def __init__(self):
        self.sq = {}
        self.sup = 0.0

    def add_sq(self, key, w, vals):
        self.sq[key] = self.sq.get(key, 0.0) + float(np.sum(w * vals))

    def norm_sum(self, prefix=None):
        return sum(math.sqrt(v) for k, v in self.sq.items() if prefix is None or k[0] == prefix)


def _gamma_dw_norms(acc, jet, alphabet, max_len, w, tag="Gdw"):
    # ||Gamma^beta d w||_2 for every word beta: derivative applied first
    first = tuple(jet.derivative(i) for i in range(4))
    for word, jets in _tree(first, alphabet, max_len):
        acc.add_sq((tag, word), w, sum(j.value ** 2 for j in jets))


# polished maxima

_OFFSETS = np.stack(np.meshgrid(*(np.linspace(-1.0, 1.0, 5),) * 3, indexing="ij")).reshape(3, -1)


def _zoom_max(func, x0, h, iters=8, shrink=0.45):
    """Refine maxima of ``func`` near the columns of ``x0`` by repeated
    5x5x5 local grid searches with shrinking step ``h`` (one per column).
    The center is always re-sampled, so the result never decreases."""
    best_x = x0.copy()
    best_v = func(best_x)
    k = best_x.shape[1]
    h = np.array(h, dtype=float)
    for _ in range(iters):
        pts = best_x[:, :, None] + h[None, :, None] * _OFFSETS[:, None, :]
        v = func(pts.reshape(3, -1)).reshape(k, -1)
        i = np.argmax(v, axis=1)
        cand = v[np.arange(k), i]
        better = cand > best_v
        best_x[:, better] = pts[:, better, i[better]]
        best_v = np.where(better, cand, best_v)
        h = h * shrink
    return best_v, best_x


def _grid_top(grid, func, k=8):
    """Starting points for the local search: the k largest grid-local maxima
    of ``func`` on the grid (phi wraps around on spherical grids)."""
    vals = np.concatenate([func(x) for x, _ in grid.chunks()])
    pts = grid.points
    if grid.mode == "cartesian":
        cube, modes = vals.reshape((grid.n,) * 3), "nearest"
    else:
        cube, modes = vals.reshape(grid.n, grid.n_theta, grid.n_phi), ("nearest", "nearest", "wrap")
    peak = (cube == maximum_filter(cube, size=3, mode=modes)) & np.isfinite(cube)
    idx = np.flatnonzero(peak.ravel())
    idx = idx[np.argsort(-vals[idx], kind="stable")[:k]]
    return vals[idx], pts[:, idx]


def _local_step(grid, x):
    r = np.linalg.norm(x, axis=0)
    if grid.mode == "cartesian":
        return np.full(r.size, grid.spacing)
    ang = 0.0 if grid.n_theta == 1 else max(np.pi / grid.n_theta, 2 * np.pi / grid.n_phi)
    return np.maximum(grid.spacing, 0.5 * r * ang)


def _ray_directions(center):
    """Unit vectors of the coordinate axes, face and body diagonals, and the
    direction of ``center``.  Sums of per-letter magnitudes over coordinate
    letters are extremal on these rays, as are ratios for fields symmetric
    about an axis through the origin."""
    dirs = [v for v in itertools.product((-1.0, 0.0, 1.0), repeat=3) if any(v)]
    c = np.asarray(center, dtype=float)
    if np.linalg.norm(c) > 1e-12:
        dirs.append(tuple(c))
    d = np.array(dirs).T
    return d / np.linalg.norm(d, axis=0)


def _ray_seeds(grid, center, radius, r_min):
    """Directions (3, rays) and radii along them covering the focus region."""
    d = float(np.linalg.norm(center))
    s = np.arange(max(r_min, d - radius), d + radius, grid.spacing / 8)
    return _ray_directions(center), s


def _zoom_line(func, dirs, s0, h, iters=10, shrink=0.2):
    """1-D version of the zoom search along fixed directions."""
    offs = np.linspace(-1.0, 1.0, 21)
    best_s = s0.copy()
    best_v = func(dirs * best_s)
    for _ in range(iters):
        ss = best_s[:, None] + h * offs[None, :]
        v = func((dirs[:, :, None] * ss[None]).reshape(3, -1)).reshape(ss.shape)
        i = np.argmax(v, axis=1)
        cand = v[np.arange(ss.shape[0]), i]
        better = cand > best_v
        best_s = np.where(better, ss[np.arange(ss.shape[0]), i], best_s)
        best_v = np.where(better, cand, best_v)
        h *= shrink
    return best_v, best_s


def polished_sup(grid, func, k=24, seeds=None) -> float:
    """sup of ``func`` (maps points (3, P) to values, -inf where excluded):
    best grid values, plus the best point on each seed ray (refined along the
    ray first), all refined by local zoom search."""
    vals, pts = _grid_top(grid, func, k)
    steps = _local_step(grid, pts)
    if seeds is not None and seeds[1].size:
        dirs, s = seeds
        sv = func((dirs[:, :, None] * s[None, None, :]).reshape(3, -1)).reshape(dirs.shape[1], s.size)
        j = np.argmax(sv, axis=1)
        ok = np.isfinite(sv[np.arange(dirs.shape[1]), j])
        h = s[1] - s[0] if s.size > 1 else grid.spacing
        v_line, s_line = _zoom_line(func, dirs[:, ok], s[j[ok]], h)
        vals = np.concatenate([vals, v_line])
        pts = np.concatenate([pts, dirs[:, ok] * s_line], axis=1)
        steps = np.concatenate([steps, np.full(int(ok.sum()), h)])
    if vals.size == 0:
        return -math.inf
    v, _ = _zoom_max(func, pts, steps)
    return float(max(v.max(), vals.max()))


# L-infinity / L2 estimates


def _lhs_value(f, t, word, kind):
    """Pointwise left-hand side as a function of the points."""

    def func(x):
        r = np.linalg.norm(x, axis=0)
        if kind == "sobolev1":
            return japanese(r) ** 0.5 * np.abs(f.jet(t, x, order=0).value)
        jet = apply_word_jet(f.jet(t, x, order=len(word) + 1), word)
        g = np.linalg.norm(_grad(jet), axis=0)
        if kind == "sobolev2":
            return japanese(r) * g
        return japanese(r) ** 0.5 * japanese(t - r) * g

    return func


def _eval_sobolev1(f, t, grid, word, sgrid):
    acc = _Acc()
    for x, w in grid.chunks():
        _gamma_dw_norms(acc, f.jet(t, x, order=2), Z_LETTERS, 1, w)
    return polished_sup(sgrid, _lhs_value(f, t, word, "sobolev1")), acc.norm_sum()


def _eval_sobolev2(f, t, grid, word, sgrid):
    n = len(word)
    acc = _Acc()
    for x, w in grid.chunks():
        _gamma_dw_norms(acc, f.jet(t, x, order=n + 3), GAMMA, n + 2, w)
    return polished_sup(sgrid, _lhs_value(f, t, word, "sobolev2")), acc.norm_sum()


def _eval_hidano1(f, t, grid, word, sgrid):
    n = len(word)
    acc = _Acc()
    for x, w in grid.chunks():
        jet = f.jet(t, x, order=n + 3)
        r = np.linalg.norm(x, axis=0)
        _gamma_dw_norms(acc, jet, GAMMA, n + 1, w)
        weight = japanese(t - r) ** 2
        for beta, (jb,) in _tree((jet,), GAMMA, n + 1):
            acc.add_sq(("tmr_d2", beta), w, weight * np.sum(_hessian(jb) ** 2, axis=(0, 1)))
    return polished_sup(sgrid, _lhs_value(f, t, word, "hidano1")), acc.norm_sum()


def _eval_ks_l2(f, t, grid, word, sgrid):
    n = len(word)
    lhs_sq = 0.0
    acc = _Acc()
    for x, w in grid.chunks():
        jet = f.jet(t, x, order=n + 2)
        r = np.linalg.norm(x, axis=0)
        h = _hessian(apply_word_jet(jet, word))
        lhs_sq += float(np.sum(w * japanese(t - r) ** 2 * np.sum(h**2, axis=(0, 1))))
        _gamma_dw_norms(acc, jet, GAMMA, n + 1, w)
        weight = japanese(t + r) ** 2
        for beta, (jb,) in _tree((jet,), GAMMA, n):
            acc.add_sq(("tpr_box", beta), w, weight * _box(jb) ** 2)
    return math.sqrt(lhs_sq), acc.norm_sum()


_NORM_EVALUATORS = {
    Estimate.SOBOLEV1: (_eval_sobolev1, lambda n: 2, False),
    Estimate.SOBOLEV2: (_eval_sobolev2, lambda n: n + 3, True),
    Estimate.HIDANO1: (_eval_hidano1, lambda n: n + 3, True),
    Estimate.KS_L2: (_eval_ks_l2, lambda n: n + 2, True),
}


def default_grid(f: FieldJet, t: float, n: int = 48, n_theta: int = 10, n_phi: int = 20) -> SpaceGrid3:
    """Spherical product grid just covering the support of ``f`` at time t."""
    reach = f.support_radius(t)
    if not math.isfinite(reach):
        raise ValueError(f"{f.name} has unbounded support; L2 estimates need compact support")
    return SpaceGrid3.radial(reach * 1.02 + 0.25, n, n_theta, n_phi)


def _drift(coarse, fine):
    if fine == 0.0 and coarse == 0.0:
        return 0.0
    return abs(fine - coarse) / max(abs(fine), abs(coarse))


def _norm_check(estimate, f, t, word, grid):
    evaluator, order_of, takes_word = _NORM_EVALUATORS[estimate]
    word = tuple(word or ())
    if word and not takes_word:
        raise ValueError(f"{estimate.value} takes no vector-field word")
    _need(f, order_of(len(word)), estimate.value)
    grid = grid or default_grid(f, t)
    _check_grid(f, t, grid)
    results = []
    for level, g in enumerate((grid, grid.refined())):
        lhs, rhs = evaluator(f, t, g, word, sampling_grid(f, t, level))
        results.append((lhs, rhs, lhs / rhs if rhs > DEGENERATE_FLOOR else math.nan))
    (lhs, rhs, ratio), (lhs_f, rhs_f, ratio_f) = results
    flags = []
    if min(rhs, rhs_f) <= DEGENERATE_FLOOR:
        flags.append("rhs_degenerate")
        ratio, drift = math.nan, math.nan
    else:
        drift = _drift(ratio, ratio_f)
        ratio = ratio_f
        if lhs_f <= DEGENERATE_FLOOR * rhs_f:
            flags.append("lhs_vanishes")
    return RatioReport(
        estimate.value, f.name, t, ratio, min(rhs, rhs_f), drift, len(grid.refined()), word,
        lhs=lhs_f, rhs=rhs_f, flags=flags, details={"grid": grid.describe()},
    )


def check_sobolev1(f: FieldJet, t: float, grid: SpaceGrid3 | None = None) -> RatioReport:
    """<r>^{1/2}|w| against sum over |alpha| <= 1 of ||Z^alpha d w||_2.

    Z includes the time derivative."""
    return _norm_check(Estimate.SOBOLEV1, f, t, (), grid)


def check_sobolev2(f: FieldJet, t: float, word=(), grid: SpaceGrid3 | None = None) -> RatioReport:
    """<r>|d Gamma^alpha w| against sum over |beta| <= |alpha|+2 of
    ||Gamma^beta d w||_2."""
    return _norm_check(Estimate.SOBOLEV2, f, t, word, grid)


def check_hidano1(f: FieldJet, t: float, word=(), grid: SpaceGrid3 | None = None) -> RatioReport:
    """<r>^{1/2}<t-r>|d Gamma^alpha w| against the first-derivative norms
    and the <t-r>-weighted second-derivative norms of Gamma^beta w."""
    return _norm_check(Estimate.HIDANO1, f, t, word, grid)


def check_ks_l2(f: FieldJet, t: float, word=(), grid: SpaceGrid3 | None = None) -> RatioReport:
    """||<t-r> d^2 Gamma^alpha w||_2 against first-derivative norms plus
    ||<t+r> box Gamma^beta w||_2."""
    return _norm_check(Estimate.KS_L2, f, t, word, grid)


# pointwise estimates

_REGIONS = (("r<=t/2", lambda r, t: r <= t / 2), ("r>=t/2", lambda r, t: r >= t / 2))


def _pointwise_pass(f, t, grid, lhs_rhs, r_min, seeds=None):
    """Scale of the right-hand side, then polished region maxima of the ratio."""
    scale, lhs_max, samples = 0.0, 0.0, 0
    for x, _ in grid.chunks():
        r = np.linalg.norm(x, axis=0)
        keep = r >= r_min
        if np.any(keep):
            samples += int(keep.sum())
            lhs, rhs = lhs_rhs(f.jet(t, x[:, keep], order=2), x[:, keep], r[keep])
            scale = max(scale, float(rhs.max()))
            lhs_max = max(lhs_max, float(lhs.max()))
    if samples == 0:
        return None
    if scale <= DEGENERATE_FLOOR:
        return dict(scale=scale, lhs_max=lhs_max, samples=0, floor=scale, regions={})
    cut = POINTWISE_REL_FLOOR * scale
    floor = [math.inf]

    def ratio_in(region):
        def func(x):
            r = np.linalg.norm(x, axis=0)
            out = np.full(r.size, -np.inf)
            ok = (r >= r_min) & region(r, t)
            if np.any(ok):
                lhs, rhs = lhs_rhs(f.jet(t, x[:, ok], order=2), x[:, ok], r[ok])
                use = rhs >= cut
                if np.any(use):
                    floor[0] = min(floor[0], float(rhs[use].min()))
                vals = np.full(lhs.size, -np.inf)
                vals[use] = lhs[use] / rhs[use]
                out[ok] = vals
            return out

        return func

    regions = {}
    for name, region in _REGIONS:
        v = polished_sup(grid, ratio_in(region), seeds=seeds)
        regions[name] = v if math.isfinite(v) else math.nan
    return dict(scale=scale, lhs_max=lhs_max, samples=samples, floor=floor[0], regions=regions)


def _pointwise_check(estimate, f, t, grid, lhs_rhs, r_min, order=3):
    _need(f, order, estimate.value)
    if f.has_y:
        raise ValueError("the R^3 estimates act on fields without a y variable")
    levels = (grid, grid.refined()) if grid else (sampling_grid(f, t, 0), sampling_grid(f, t, 1))
    center, radius, _ = f.focus_at(t) if grid is None else ((0.0, 0.0, 0.0), 0.0, None)
    coarse, fine = (
        _pointwise_pass(f, t, g, lhs_rhs, r_min, _ray_seeds(g, center, radius, r_min)) for g in levels
    )
    flags = []
    details = {"r_min": r_min, "rel_floor": POINTWISE_REL_FLOOR, "grid": levels[0].describe()}
    if fine is None or coarse is None:
        return RatioReport(estimate.value, f.name, t, math.nan, 0.0, math.nan, 0, flags=["no_samples"],
                           details=details)
    if fine["scale"] <= DEGENERATE_FLOOR:
        return RatioReport(estimate.value, f.name, t, math.nan, fine["scale"], math.nan, 0,
                           flags=["rhs_degenerate"], details=details)

    def overall(res):
        vals = [v for v in res["regions"].values() if not math.isnan(v)]
        return max(vals) if vals else math.nan

    ratio = overall(fine)
    drift = _drift(overall(coarse), ratio)
    for name, v in fine["regions"].items():
        if math.isnan(v):
            flags.append(f"empty_region:{name}")
    if fine["lhs_max"] <= DEGENERATE_FLOOR * fine["scale"]:
        flags.append("lhs_vanishes")
    return RatioReport(
        estimate.value, f.name, t, ratio, fine["floor"], drift, fine["samples"],
        regions=fine["regions"], flags=flags, details=details,
    )


def _sum_grad_gamma(jet):
    total = np.linalg.norm(_grad(jet), axis=0)
    for letter in GAMMA:
        total = total + np.linalg.norm(_grad(apply_letter(jet, letter)), axis=0)
    return total


def _ks_lhs_rhs(which, t):
    def lhs_rhs(jet, x, r):
        H = _hessian(jet)
        if which == "delta":
            q = np.abs(H[1, 1] + H[2, 2] + H[3, 3])
            weight = t + r
        elif which == "dtdt":
            q = np.abs(H[0, 0])
            weight = np.full_like(r, t)
        else:
            q = np.linalg.norm(H[0, 1:], axis=0)
            weight = np.full_like(r, t)
        lhs = japanese(t - r) * q
        rhs = _sum_grad_gamma(jet) + weight * np.abs(_box(jet))
        return lhs, rhs

    return lhs_rhs


_KS = {"delta": Estimate.KS_DELTA, "dtdt": Estimate.KS_DTDT, "dtdx": Estimate.KS_DTDX}


def check_ks_pointwise(f: FieldJet, t: float, which: str, grid: SpaceGrid3 | None = None, r_min: float = R_MIN):
    """<t-r> times |Laplacian w|, |d_t^2 w| or |grad d_t w| against
    sum_{|alpha|<=1} |d Gamma^alpha w| plus the weighted |box w|; the
    forcing weight is t + r for the Laplacian and t otherwise."""
    if which not in _KS:
        raise ValueError(f"which must be one of {sorted(_KS)}")
    return _pointwise_check(_KS[which], f, t, grid, _ks_lhs_rhs(which, t), r_min)


def _radial_pieces(jet, x, r):
    """Laplacian, d_r^2, (2/r) d_r and (1/r^2) sum Omega_ij^2 of a jet."""
    H = _hessian(jet)[1:, 1:]
    g = _grad(jet)[1:]
    xh = x / r
    lap = H[0, 0] + H[1, 1] + H[2, 2]
    drdr = np.einsum("ip,ijp,jp->p", xh, H, xh)
    dr_term = 2.0 / r * np.sum(xh * g, axis=0)
    ang = 0.0
    for letter in ("O12", "O13", "O23"):
        ang = ang + apply_letter(apply_letter(jet, letter), letter).value
    return lap, drdr, dr_term, ang / r**2


def laplacian_identity_residual(f: FieldJet, t: float, x: np.ndarray) -> dict:
    """Max of |Lap w - (d_r^2 + (2/r) d_r + r^-2 Omega.Omega) w| relative to
    the size of the pieces."""
    _need(f, 2, "radial Laplacian identity")
    jet = f.jet(t, x, order=2)
    r = np.linalg.norm(x, axis=0)
    lap, drdr, dr_term, ang = _radial_pieces(jet, x, r)
    resid = np.abs(lap - drdr - dr_term - ang)
    scale = max(np.max(np.abs(drdr)), np.max(np.abs(dr_term)), np.max(np.abs(ang)), 1e-300)
    return dict(max_residual=float(resid.max()), relative=float(resid.max() / scale),
                dr_term=dr_term, angular=ang, laplacian=lap, drdr=drdr)


def check_delta_drdr(f: FieldJet, t: float, grid: SpaceGrid3 | None = None, r_min: float = R_MIN):
    """|Lap w - d_r^2 w| against r^{-1} sum_{|alpha|<=1} |grad_x Z^alpha w|
    with spatial Z (translations and rotations in x)."""

    def lhs_rhs(jet, x, r):
        lap, drdr, _, _ = _radial_pieces(jet, x, r)
        total = np.linalg.norm(_grad(jet)[1:], axis=0)
        for letter in SPATIAL_Z:
            total = total + np.linalg.norm(_grad(apply_letter(jet, letter))[1:], axis=0)
        return np.abs(lap - drdr), total / r

    return _pointwise_check(Estimate.DELTA_DRDR, f, t, grid, lhs_rhs, r_min)


def run_estimate(estimate, f, t, word=(), grid=None) -> RatioReport:
    estimate = Estimate(estimate)
    if estimate in (Estimate.SOBOLEV1,):
        return check_sobolev1(f, t, grid)
    if estimate in _NORM_EVALUATORS:
        return _norm_check(estimate, f, t, word, grid)
    if estimate is Estimate.DELTA_DRDR:
        return check_delta_drdr(f, t, grid)
    inverse = {v: k for k, v in _KS.items()}
    if estimate in inverse:
        return check_ks_pointwise(f, t, inverse[estimate], grid)
    raise ValueError(f"{estimate.value} is not a field estimate")


# ODE comparison bound


def check_ode_lemma(mu: float, h, v0: float, v0p: float, a: float = 0.0, b: float = 1.0,
                    n_eval: int = 20001, tolerance: float = 1e-6) -> RatioReport:
    """Integrate v'' + mu^2 v = h on [a, b] and compare sup|v| with
    |v(a)| + |v'(a)| + (1/mu) int |h|."""
    if mu < 1:
        raise ValueError(f"the comparison bound needs mu >= 1, got {mu}")
    if not b > a:
        raise ValueError("need b > a")

    def rhs(s, y):
        return [y[1], h(s) - mu**2 * y[0]]

    sol = solve_ivp(rhs, (a, b), [v0, v0p], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    s = np.linspace(a, b, n_eval)
    sup = float(np.max(np.abs(sol.sol(s)[0])))
    hv = np.abs(np.asarray(h(s), dtype=float) * np.ones_like(s))
    # composite Simpson on the dense sample
    integral = float((s[1] - s[0]) / 3 * (hv[0] + hv[-1] + 4 * hv[1:-1:2].sum() + 2 * hv[2:-1:2].sum()))
    bound = abs(v0) + abs(v0p) + integral / mu
    flags = []
    if bound <= DEGENERATE_FLOOR:
        flags.append("rhs_degenerate")
        ratio = math.nan
    else:
        ratio = sup / bound
        if ratio > 1 + tolerance:
            flags.append("bound_violated")
    return RatioReport(Estimate.ODE_LEMMA.value, f"mu={mu:g}", b, ratio, bound, 0.0, n_eval,
                       lhs=sup, rhs=bound, flags=flags, details={"interval": (a, b), "integral_abs_h": integral})


# dyadic decay estimates


def dyadic_rhs(times, norms, t: float, B: float) -> float:
    """sum_k 2^k sup { norms(tau) : tau in [2^(k-1), 2^(k+1)] and [2B, t] }."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    lo = 2.0 * B
    if t < lo:
        return 0.0
    k_lo = math.floor(math.log2(max(lo, 1e-300))) - 1
    k_hi = math.ceil(math.log2(max(t, 1e-300))) + 1
    total = 0.0
    window = (times >= lo) & (times <= t)
    for k in range(k_lo, k_hi + 1):
        m = window & (times >= 2.0 ** (k - 1)) & (times <= 2.0 ** (k + 1))
        if np.any(m):
            total += 2.0**k * float(norms[m].max())
    return total


def _block_density(times, t_end, B, min_samples):
    lo = 2.0 * B
    sparse = []
    k_lo = math.floor(math.log2(lo)) - 1
    k_hi = math.ceil(math.log2(t_end)) + 1
    for k in range(k_lo, k_hi + 1):
        a, b = max(2.0 ** (k - 1), lo), min(2.0 ** (k + 1), t_end)
        if b <= a:
            continue
        count = int(np.sum((times >= a) & (times <= b)))
        if count < min_samples:
            sparse.append(k)
    return sparse


def _decay_check(estimate, times, lhs_quantity, power, forcing_norms, B, label, min_samples=4):
    times = np.asarray(times, dtype=float)
    lhs_all = (1.0 + times) ** power * np.asarray(lhs_quantity, dtype=float)
    rhs_all = np.array([dyadic_rhs(times, forcing_norms, t, B) for t in times])
    use = rhs_all > DEGENERATE_FLOOR
    flags = []
    sparse = _block_density(times, float(times.max()), B, min_samples)
    if sparse:
        flags.append("sparse_dyadic_blocks:" + ",".join(map(str, sparse)))
    if not np.any(use):
        flags.append("rhs_degenerate")
        return RatioReport(estimate.value, label, float(times.max()), math.nan, 0.0, math.nan, len(times),
                           flags=flags)
    ratios = lhs_all[use] / rhs_all[use]
    i = int(np.argmax(ratios))
    return RatioReport(
        estimate.value, label, float(times[use][i]), float(ratios[i]), float(rhs_all[use].min()), math.nan,
        int(use.sum()), lhs=float(lhs_all[use][i]), rhs=float(rhs_all[use][i]), flags=flags,
        details={"ratio_series": ratios.tolist(), "times": times[use].tolist()},
    )


def check_wave_decay(times, sup_grad, forcing_norms, B: float, label: str = "wave") -> RatioReport:
    """(1+t) sup|d w(t)| against the dyadic sum of forcing norms.

    ``forcing_norms[i]`` is sum over the vector-field words of
    ||Gamma^alpha box w(times[i])||_2."""
    return _decay_check(Estimate.WAVE_DECAY, times, sup_grad, 1.0, forcing_norms, B, label)


def check_kg_decay(times, sup_value, forcing_norms, B: float, label: str = "kg") -> RatioReport:
    """(1+t)^{3/2} sup|w(t)| against the dyadic sum of forcing norms."""
    return _decay_check(Estimate.KG_DECAY, times, sup_value, 1.5, forcing_norms, B, label)


# the full suite

FIELD_ESTIMATES = (
    Estimate.SOBOLEV1,
    Estimate.SOBOLEV2,
    Estimate.HIDANO1,
    Estimate.KS_DELTA,
    Estimate.KS_DTDT,
    Estimate.KS_DTDX,
    Estimate.DELTA_DRDR,
    Estimate.KS_L2,
)
MAX_DRIFT = 0.05
ODE_TOLERANCE = 1e-6


def ode_lemma_cases() -> list:
    """(mu, h, v0, v0', label): free oscillations, resonant and constant
    forcing, and a forcing concentrated near the left end."""
    return [
        (1.0, lambda s: 0.0 * s, 1.0, 0.0, "free cos"),
        (3.0, lambda s: 0.0 * s, 0.0, 1.0, "free sin"),
        (1.0, lambda s: np.cos(s), 0.0, 0.0, "resonant mu=1"),
        (4.0, lambda s: np.sin(4.0 * s), 0.5, -0.5, "resonant mu=4"),
        (2.0, lambda s: np.ones_like(s), 0.0, 0.0, "constant"),
        (10.0, lambda s: np.exp(-50.0 * s * s), 0.1, 0.0, "kick"),
    ]


def verify_suite(fields=None, times=(2.0,), estimates=FIELD_ESTIMATES, word=(), ode_b: float = 3.0,
                 max_drift: float = MAX_DRIFT, ratio_max: float = math.inf) -> dict:
    """Every field estimate on every field at each time, plus the ODE cases.

    A field row passes when its ratio is finite, at most ``ratio_max``, and
    moved by less than ``max_drift`` under grid refinement; an ODE row passes
    when its ratio is at most 1 + ODE_TOLERANCE."""
    from .fields import corpus

    fields = corpus() if fields is None else fields
    rows, failures = [], []
    for f in fields:
        for t in times:
            for est in estimates:
                est = Estimate(est)
                w = word if est in (Estimate.SOBOLEV2, Estimate.HIDANO1, Estimate.KS_L2) else ()
                rep = run_estimate(est, f, t, w)
                row = rep.row()
                drift_ok = rep.degenerate or rep.refinement_drift < max_drift
                row["passed"] = bool(math.isfinite(rep.ratio) and rep.ratio <= ratio_max and drift_ok)
                rows.append(row)
                if not row["passed"]:
                    failures.append(row)
    for mu, h, v0, v0p, label in ode_lemma_cases():
        rep = check_ode_lemma(mu, h, v0, v0p, 0.0, ode_b, tolerance=ODE_TOLERANCE)
        row = rep.row()
        row["field"] = label
        row["passed"] = bool(rep.ratio <= 1.0 + ODE_TOLERANCE)
        rows.append(row)
        if not row["passed"]:
            failures.append(row)
    field_rows = [r for r in rows if r["estimate"] != Estimate.ODE_LEMMA.value]
    ode_rows = [r for r in rows if r["estimate"] == Estimate.ODE_LEMMA.value]
    drifts = [r["drift"] for r in field_rows if math.isfinite(r["drift"])]
    return {
        "rows": rows,
        "failures": failures,
        "passed": not failures,
        "n_fields": len(fields),
        "max_drift": max(drifts) if drifts else math.nan,
        "max_ode_ratio": max(r["ratio"] for r in ode_rows) if ode_rows else math.nan,
    }
