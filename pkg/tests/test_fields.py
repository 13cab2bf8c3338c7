import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveguide.fields import (
    BOOSTS,
    GAMMA,
    PARTIALS,
    ROTATIONS,
    SpaceGrid3,
    SupportOverflow,
    apply_word,
    catalog_field,
    corpus,
    fd_word,
    from_expression,
    radial_boost_norm_identity,
    weighted_norms,
)
from waveguide.jets import OrderExhausted

E = {"dt": (1, 0, 0, 0), "d1": (0, 1, 0, 0), "d2": (0, 0, 1, 0), "d3": (0, 0, 0, 1)}


def random_points(n, seed=0, rmin=0.3, rmax=4.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, n))
    return x / np.linalg.norm(x, axis=0) * rng.uniform(rmin, rmax, n)


def box(jet):
    return jet.partial((2, 0, 0, 0)) - sum(jet.partial(a) for a in ((0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2)))


def test_catalog_rejects_unknown_name():
    with pytest.raises(ValueError):
        catalog_field("square_wave")


def test_gaussian_gradient_vanishes_at_center():
    g = catalog_field("gaussian_bump", center=(0, 0, 0), width=1.0)
    jet = g.jet(0.0, np.zeros((3, 1)), order=1)
    assert jet.partial(E["d1"])[0] == 0.0


def test_smoothed_outgoing_solves_wave_equation():
    f = catalog_field("smoothed_outgoing", width=1.0)
    x = random_points(100, rmin=1.05, rmax=6.0)
    jet = f.jet(3.0, x, order=2)
    assert np.max(np.abs(box(jet))) < 1e-10
    assert np.max(np.abs(jet.value)) > 1e-3


def test_kg_free_mode_dispersion():
    f = catalog_field("kg_free_mode", mu=2.0, xi=(0.3, -0.5, 1.1))
    jet = f.jet(1.7, random_points(50), order=2)
    assert np.max(np.abs(box(jet) + 4.0 * jet.value)) < 1e-12


@pytest.mark.parametrize("name", ["gaussian_bump", "smoothed_outgoing", "static_bump"])
def test_rotations_kill_radial_fields(name):
    f = catalog_field(name)
    x = random_points(200, seed=3)
    for rot in ROTATIONS:
        assert np.max(np.abs(apply_word((rot,), f).values(2.0, x))) < 1e-12


def test_radial_kind_is_rotation_invariant():
    f = catalog_field("smoothed_outgoing", width=1.5)
    x = random_points(40, seed=4)
    q, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(3, 3)))
    np.testing.assert_allclose(f.values(2.0, x), f.values(2.0, q @ x), rtol=1e-12, atol=1e-14)


def test_commutator_dt_boost():
    f = catalog_field("gaussian_bump", center=(0.5, -0.2, 0.1), omega=1.1)
    x = random_points(30, seed=6)
    a = apply_word(("O01", "dt"), f).values(0.8, x)
    b = apply_word(("dt", "O01"), f).values(0.8, x)
    d1 = apply_word(("d1",), f).values(0.8, x)
    np.testing.assert_allclose(a - b, d1, atol=1e-12)


def _expected_commutator(d, g):
    # [d, g] as {partial: coefficient}, derived by hand from the letter formulas
    if g in PARTIALS:
        return {}
    i, j = int(g[1]), int(g[2])
    k = int(d[1]) if d != "dt" else 0
    if g in ROTATIONS:  # x_i d_j - x_j d_i
        out = {}
        if k == i:
            out[f"d{j}"] = 1.0
        if k == j:
            out[f"d{i}"] = -1.0
        return out
    # boost x_j dt + t d_j
    if k == 0:
        return {f"d{j}": 1.0}
    return {"dt": 1.0} if k == j else {}


def test_commutators_land_in_translations():
    members = corpus()[:10]
    x = random_points(15, seed=7)
    t = 1.3
    worst = 0.0
    for f in members:
        for d in PARTIALS:
            for g in GAMMA:
                lhs = apply_word((g, d), f).values(t, x) - apply_word((d, g), f).values(t, x)
                rhs = sum(c * apply_word((p,), f).values(t, x) for p, c in _expected_commutator(d, g).items())
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst < 1e-8


def test_plane_packet_word_matches_finite_differences():
    f = catalog_field("plane_packet", direction=(1.0, 2.0, 0.5), offset=(0.3, 0.0, 0.0), order=4)
    x = np.random.default_rng(8).uniform(-2, 2, size=(3, 20))
    jet = apply_word(("dt", "O23"), f).values(0.7, x)
    fd = fd_word(f, ("dt", "O23"), 0.7, x, h=1e-3)
    assert np.max(np.abs(jet - fd)) / np.max(np.abs(jet)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(
    idx=st.integers(0, 21),
    word=st.lists(st.sampled_from(GAMMA), min_size=1, max_size=2),
    t=st.floats(0.0, 3.0),
    seed=st.integers(0, 1000),
)
def test_words_match_finite_difference_oracle(idx, word, t, seed):
    f = corpus()[idx]
    x = random_points(8, seed=seed, rmin=0.2, rmax=3.0)
    jet = apply_word(tuple(word), f).values(t, x)
    h = 4e-3
    fd = fd_word(f, tuple(word), t, x, h=h)
    # scale by the derivative data at these points; nested differences of
    # unit-amplitude fields carry round-off of order eps / h^len(word)
    scale = max(np.max(np.abs(jet)), np.max(np.abs(apply_word((word[-1],), f).values(t, x))), 1e-3)
    noise = 1e4 * np.finfo(float).eps / h ** len(word)
    assert np.max(np.abs(jet - fd)) <= 1e-6 * scale + noise


def test_word_errors():
    f = catalog_field("gaussian_bump", order=2)
    with pytest.raises(OrderExhausted):
        apply_word(("dt", "d1", "d2"), f)
    with pytest.raises(ValueError):
        apply_word(("dy",), f)
    with pytest.raises(ValueError):
        apply_word(("O45",), f)
    g = catalog_field("waveguide_mode", k=2, bc="neumann")
    jet = apply_word(("dy",), g).jet(0.0, np.zeros((3, 1)), y=np.array([0.0]), order=0)
    assert jet.value[0] == 0.0


def test_custom_expression_field():
    f = from_expression("x1", lambda T, X1, X2, X3: X1 * 1.0)
    x = random_points(5)
    np.testing.assert_allclose(apply_word(("d1",), f).values(0.0, x), 1.0)


def test_gaussian_l2_norm_closed_form():
    g = catalog_field("gaussian_bump", width=1.0)
    rep = weighted_norms(g, 0.0, SpaceGrid3.radial(7.0, 200))
    assert rep.l2**2 == pytest.approx((np.pi / 2) ** 1.5, rel=1e-6)
    assert rep.sup <= 1.0
    assert rep.refinement_change < 1e-6


def test_flat_bump_sup_is_height():
    f = catalog_field("static_bump", radius=2.0, plateau=0.5)
    rep = weighted_norms(f, 0.0, SpaceGrid3.cartesian(2.5, 30))
    assert rep.sup == pytest.approx(1.0, abs=1e-3)
    assert all(v >= 0 for v in rep.weighted_sup.values())


def test_radial_and_cartesian_backends_agree():
    g = catalog_field("gaussian_bump", width=1.0)
    radial = weighted_norms(g, 0.0, SpaceGrid3.radial(7.0, 200), refine=False)
    cart = weighted_norms(g, 0.0, SpaceGrid3.cartesian(7.0, 56), refine=False)
    assert cart.l2 == pytest.approx(radial.l2, rel=1e-4)
    s = catalog_field("smoothed_outgoing", width=1.0)
    radial = weighted_norms(s, 2.0, SpaceGrid3.radial(3.5, 400), refine=False)
    cart = weighted_norms(s, 2.0, SpaceGrid3.cartesian(3.5, 120), refine=False)
    assert cart.l2 == pytest.approx(radial.l2, rel=1e-4)


def test_support_overflow():
    s = catalog_field("smoothed_outgoing", width=1.0)
    with pytest.raises(SupportOverflow):
        weighted_norms(s, 10.0, SpaceGrid3.radial(5.0, 100))


def test_corpus_quadrature_converges():
    for f in corpus():
        t = 1.0
        R = f.support_radius(t) + 0.5
        rep = weighted_norms(f, t, SpaceGrid3.radial(R, 96, 12, 24))
        assert rep.refinement_change < 0.01, f.name


def test_boost_identity_radial_and_cartesian():
    s = catalog_field("smoothed_outgoing", width=1.0)
    rad = radial_boost_norm_identity(s, 5.0, SpaceGrid3.radial(6.5, 600))
    cart = radial_boost_norm_identity(s, 5.0, SpaceGrid3.cartesian(6.5, 50))
    assert rad["relative_difference"] < 1e-8
    assert cart["relative_difference"] < 1e-8
    assert rad["boosts_sq"] > 0


def test_boost_identity_static_field_at_time_zero():
    f = catalog_field("static_bump", radius=2.0)
    rep = radial_boost_norm_identity(f, 0.0)
    assert rep["boosts_sq"] == 0.0 and rep["radial_boost_sq"] == 0.0


def test_boost_identity_rejects_general_field():
    with pytest.raises(ValueError):
        radial_boost_norm_identity(catalog_field("plane_packet"), 0.0)


def test_corpus_size_and_boosts_present():
    members = corpus()
    assert len(members) >= 20
    assert {f.name for f in members} == {"gaussian_bump", "smoothed_outgoing", "plane_packet", "static_bump"}
    assert set(BOOSTS) <= set(GAMMA)
