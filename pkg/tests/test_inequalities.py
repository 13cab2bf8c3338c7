import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveguide.fields import catalog_field, corpus, from_expression
from waveguide.inequalities import (
    FIELD_ESTIMATES,
    MAX_DRIFT,
    check_delta_drdr,
    check_kg_decay,
    check_ks_l2,
    check_ks_pointwise,
    check_ode_lemma,
    check_sobolev1,
    check_wave_decay,
    dyadic_rhs,
    laplacian_identity_residual,
    run_estimate,
    verify_suite,
)


def random_points(n, seed=0, rmin=0.3, rmax=4.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, n))
    return x / np.linalg.norm(x, axis=0) * rng.uniform(rmin, rmax, n)


# degenerate and structural cases


def test_zero_field_is_flagged_not_asserted():
    f = catalog_field("gaussian_bump", amplitude=0.0)
    for rep in (check_sobolev1(f, 1.0), check_ks_pointwise(f, 1.0, "delta")):
        assert "rhs_degenerate" in rep.flags
        assert rep.degenerate
        assert math.isnan(rep.ratio)


def test_static_field_has_no_time_derivatives():
    f = catalog_field("static_bump", radius=2.0, plateau=0.3)
    for which in ("dtdt", "dtdx"):
        rep = check_ks_pointwise(f, 2.0, which)
        assert "lhs_vanishes" in rep.flags
        assert rep.ratio == 0.0


def test_outgoing_shell_leaves_inner_region_empty():
    f = catalog_field("smoothed_outgoing", width=1.0, delay=0.0)
    rep = check_ks_pointwise(f, 2.0, "delta")
    assert "empty_region:r<=t/2" in rep.flags
    assert math.isfinite(rep.ratio) and rep.ratio > 0


def test_pointwise_checks_reject_bad_input():
    f = catalog_field("gaussian_bump")
    with pytest.raises(ValueError):
        check_ks_pointwise(f, 1.0, "dxdx")
    with pytest.raises(ValueError):
        check_delta_drdr(catalog_field("waveguide_mode"), 1.0)


def test_unknown_estimate_name():
    with pytest.raises(ValueError):
        run_estimate("energy", catalog_field("gaussian_bump"), 1.0)


@settings(max_examples=4, deadline=None)
@given(c=st.floats(0.1, 10.0))
def test_ratios_are_homogeneous_of_degree_zero(c):
    f = catalog_field("gaussian_bump", width=1.0)
    for check in (check_sobolev1, check_ks_l2):
        a, b = check(f, 1.0), check(f.scaled(c), 1.0)
        assert b.ratio == pytest.approx(a.ratio, rel=1e-9)


# radial Laplacian identity, closed forms


def test_laplacian_identity_holds_pointwise():
    f = catalog_field("gaussian_bump", center=(0.4, -0.2, 0.1), width=1.0, omega=0.8)
    res = laplacian_identity_residual(f, 0.7, random_points(200))
    assert res["relative"] < 1e-12


def test_radial_pieces_of_r_squared():
    # w = |x|^2: d_r^2 w = 2, (2/r) d_r w = 4, no angular part, Lap w = 6
    f = from_expression("r2", lambda t, x1, x2, x3: x1 * x1 + x2 * x2 + x3 * x3, support=lambda t: 5.0)
    res = laplacian_identity_residual(f, 0.0, random_points(50))
    np.testing.assert_allclose(res["drdr"], 2.0, atol=1e-12)
    np.testing.assert_allclose(res["dr_term"], 4.0, atol=1e-12)
    np.testing.assert_allclose(res["angular"], 0.0, atol=1e-12)
    np.testing.assert_allclose(res["laplacian"], 6.0, atol=1e-12)


def test_radial_pieces_of_x1():
    # w = x1: (2/r) d_r w = 2 x1 / r^2 and the angular part cancels it
    f = from_expression("x1", lambda t, x1, x2, x3: x1, support=lambda t: 5.0)
    x = random_points(50, seed=3)
    r2 = np.sum(x * x, axis=0)
    res = laplacian_identity_residual(f, 0.0, x)
    np.testing.assert_allclose(res["dr_term"], 2 * x[0] / r2, atol=1e-12)
    np.testing.assert_allclose(res["angular"], -2 * x[0] / r2, atol=1e-12)
    np.testing.assert_allclose(res["drdr"], 0.0, atol=1e-12)


# ODE comparison bound (its constant is exactly 1)


def test_ode_bound_is_attained_by_free_cosine():
    rep = check_ode_lemma(1.0, lambda s: 0.0 * s, 1.0, 0.0, 0.0, 4.0)
    assert rep.ratio == pytest.approx(1.0, abs=1e-9)
    assert not rep.flags


@settings(max_examples=30, deadline=None)
@given(
    mu=st.floats(1.0, 20.0),
    v0=st.floats(-2.0, 2.0),
    v0p=st.floats(-2.0, 2.0),
    amp=st.floats(-5.0, 5.0),
    omega=st.floats(0.0, 25.0),
)
def test_ode_ratio_never_exceeds_one(mu, v0, v0p, amp, omega):
    rep = check_ode_lemma(mu, lambda s: amp * np.cos(omega * s), v0, v0p, 0.0, 2.0)
    if rep.degenerate:
        return
    assert rep.ratio <= 1.0 + 1e-6


def test_ode_lemma_preconditions():
    with pytest.raises(ValueError):
        check_ode_lemma(0.5, lambda s: s, 1.0, 0.0)
    with pytest.raises(ValueError):
        check_ode_lemma(1.0, lambda s: s, 1.0, 0.0, a=1.0, b=1.0)
    rep = check_ode_lemma(2.0, lambda s: 0.0 * s, 0.0, 0.0)
    assert "rhs_degenerate" in rep.flags


# dyadic decay estimates


def test_dyadic_sum_closed_form():
    # B = 1 and t = 3: blocks k = 0, 1, 2 meet [2, 3], weights 1 + 2 + 4
    times = np.linspace(2.0, 3.0, 11)
    assert dyadic_rhs(times, np.ones_like(times), 3.0, 1.0) == 7.0
    assert dyadic_rhs(times, np.ones_like(times), 1.5, 1.0) == 0.0


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.01, 100.0), seed=st.integers(0, 1000))
def test_dyadic_sum_is_positively_homogeneous(scale, seed):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(2.0, 60.0, 40))
    norms = rng.uniform(0.0, 1.0, 40)
    a = dyadic_rhs(times, norms, 60.0, 1.0)
    assert dyadic_rhs(times, scale * norms, 60.0, 1.0) == pytest.approx(scale * a, rel=1e-12)


def test_dyadic_sum_is_monotone_in_time():
    times = np.linspace(2.0, 50.0, 200)
    norms = np.exp(-times / 10)
    vals = [dyadic_rhs(times, norms, t, 1.0) for t in times]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_decay_checks_flag_missing_forcing():
    t = np.linspace(2.0, 40.0, 100)
    rep = check_wave_decay(t, 1 / t, np.zeros_like(t), 1.0)
    assert "rhs_degenerate" in rep.flags
    rep = check_kg_decay(t, t**-1.5, np.where(t < 3, 1.0, 0.0), 1.0)
    assert math.isfinite(rep.ratio)
    assert rep.lhs == pytest.approx(rep.ratio * rep.rhs)


def test_sparse_dyadic_blocks_are_flagged():
    t = np.array([2.0, 2.5, 30.0, 40.0])
    rep = check_wave_decay(t, 1 / t, np.ones_like(t), 1.0)
    assert any(f.startswith("sparse_dyadic_blocks") for f in rep.flags)


# the corpus


def test_corpus_subset_passes_suite():
    fields = [corpus()[i] for i in (0, 13)]  # a Gaussian and a plane packet
    res = verify_suite(fields)
    assert res["passed"], res["failures"]
    assert len(res["rows"]) == 2 * len(FIELD_ESTIMATES) + 6
    assert res["max_drift"] < MAX_DRIFT
    assert res["max_ode_ratio"] <= 1.0 + 1e-6


def test_suite_reports_failures_against_tight_bounds():
    res = verify_suite([corpus()[0]], ratio_max=1e-6)
    assert not res["passed"]
    assert all(r["ratio"] > 1e-6 for r in res["failures"])
