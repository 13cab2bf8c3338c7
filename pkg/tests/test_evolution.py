import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveguide.evolution import (
    CompatibilityRefused,
    Discretization,
    DomainOverflow,
    InitialData,
    Nonlinearity,
    RadialGrid,
    StepRejected,
    canonical_examples,
    check_neumann_compatibility,
    compatibility_agreement,
    evolve,
    find_blowup,
    initial_state,
    preset,
    read_snapshots,
    reference_grid,
    step_physical,
    write_snapshots,
)
from waveguide.evolution.cutoff import Cutoff, commutator, cutoff_setup
from waveguide.evolution.diagnostics import (
    PulseForcing,
    commutation_run,
    convergence_order,
    dirichlet_trick_check,
    driven_kg_decay,
    driven_run,
    driven_wave_decay,
    energy_drift,
    free_wave_exact,
    pulse_energy_run,
)
from waveguide.evolution.nonlinearity import compatibility_closed_form, compatibility_sampled
from waveguide.evolution.picard import picard_iterate
from waveguide.evolution.radial3d import evolve_radial3d
from waveguide.experiments import john_data
from waveguide.spectral import BC, BaseInterval, build_spectrum

PI = math.pi


def spectrum(J, bc="neumann"):
    return build_spectrum(BaseInterval(0.0, PI, BC(bc)), J)


# linear solver against exact solutions


def test_exact_free_wave_is_continuous_at_origin():
    r = np.array([0.0, 1e-6])
    for t in (0.0, 0.7, 1.9, 2.5):
        u = free_wave_exact(r, t, B=2.0)
        assert u[0] == pytest.approx(u[1], abs=1e-5)


def test_exact_free_wave_matches_data_at_time_zero():
    r = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(free_wave_exact(r, 0.0, B=2.0), np.clip(1 - (r / 2) ** 2, 0, None) ** 6,
                               atol=1e-15)


def test_convergence_order_against_exact_solution():
    res = convergence_order()
    assert min(res["orders"]) >= 1.9
    assert res["errors"][-1] < 1e-5


def test_energy_drift_shrinks_with_time_step():
    coarse = energy_drift(T=10.0, dr=0.1, cfl=0.5)["drift"]
    fine = energy_drift(T=10.0, dr=0.1, cfl=0.25)["drift"]
    assert fine < coarse / 8  # RK4: about 16x per halving


def test_mode_isolation():
    spec = spectrum(4)
    res = evolve(InitialData(eps=1.0, B=2.0, f_modes={3: 1.0}), preset("zero"), 5.0, spec, dr=0.1)
    U = res.final.U
    assert np.abs(U[[0, 1, 3]]).max() < 1e-10
    assert np.abs(U[2]).max() > 1e-3


def test_finite_propagation_speed():
    spec = spectrum(2)
    data = InitialData(eps=1.0, B=2.0, f_modes={1: 1.0, 2: 0.5})
    for T in (2.0, 5.0):
        res = evolve(data, preset("zero"), T, spec, dr=0.1, cfl=0.5)
        assert res.final.support_radius() <= data.B + T + 1.0


def test_domain_overflow_is_detected():
    spec = spectrum(1)
    data = InitialData(eps=1.0, B=2.0)
    with pytest.raises(DomainOverflow):
        evolve(data, preset("zero"), 10.0, spec, rgrid=RadialGrid.covering(4.0, 0.1))


def test_step_rejected_above_stability_limit():
    spec = spectrum(2)
    disc = Discretization(spec, reference_grid(InitialData(eps=1.0), 1.0, 0.1))
    state = initial_state(InitialData(eps=1.0), disc)
    with pytest.raises(StepRejected):
        step_physical(state, preset("zero"), 10 * disc.max_dt())
    with pytest.raises(StepRejected):
        evolve(InitialData(eps=1.0), preset("zero"), 1.0, spec, dr=0.1, cfl=5.0)


def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData(eps=1.0, B=-1.0)
    with pytest.raises(ValueError):
        InitialData(eps=1.0, B=2.0, width=1.5)
    with pytest.raises(ValueError):
        InitialData(eps=1.0, B=4.0, width=1.0, outgoing=True, g_modes={1: 1.0})
    with pytest.raises(ValueError):
        InitialData(eps=1.0, f_modes={0: 1.0})
    with pytest.raises(ValueError):
        InitialData(eps=1.0, f_modes={3: 1.0}).modal(spectrum(2), RadialGrid(0.1, 40))


def test_outgoing_data_is_normalized():
    data = john_data(0.3)
    spec = spectrum(1)
    _, Ut = data.modal(spec, RadialGrid.covering(10.0, 0.01))
    assert np.abs(Ut[0] * spec.norm_constants[0]).max() == pytest.approx(0.3, rel=1e-3)


# zero mode against the standalone R^3 integrator


def _zero_mode_gap(name, dr, T=4.0):
    spec = spectrum(1)
    data = InitialData(eps=0.5, B=2.0, f_modes={1: 1.0}, g_modes={1: 0.5})
    nl = Nonlinearity(R=np.diag([1.0, -1.0, -1.0, -1.0, 0.0]), name="x_null") if name == "x_null" else preset(name)
    res = evolve(data, nl, T, spec, dr=dr, cfl=0.5)
    U, Ut = data.modal(spec, reference_grid(data, T, dr))
    c = spec.norm_constants[0]
    u, _, _ = evolve_radial3d(U[0] * c, Ut[0] * c, dr, T, nl)
    return float(np.abs(u - res.final.U[0] * c).max())


@pytest.mark.parametrize("name", ["zero", "john", "x_null"])
def test_zero_mode_matches_standalone_integrator(name):
    coarse, fine = _zero_mode_gap(name, 0.1), _zero_mode_gap(name, 0.05)
    assert fine < 1e-3
    assert coarse / fine > 3.0  # the second-order route dominates the gap


def test_standalone_integrator_refuses_y_terms():
    with pytest.raises(ValueError):
        evolve_radial3d(np.zeros(20), np.zeros(20), 0.1, 1.0, preset("null_form"))
    with pytest.raises(ValueError):
        evolve_radial3d(np.zeros(20), np.zeros(20), 0.1, 1.0, preset("quasi_x"))


# blowup detection


def test_blowup_is_bracketed_and_confirmed():
    b = find_blowup(john_data(0.5), preset("john"), 30.0, spectrum(1), dr=0.1, cfl=0.5)
    assert not b["censored"] and b["confirmed"]
    lo, hi = b["bracket"]
    assert lo < b["time"] < hi and hi - lo == pytest.approx(b["width"])
    assert b["shrink"] == pytest.approx(0.5, rel=1e-6)
    assert 5.0 < b["time"] < 10.0


def test_blowup_censored_within_short_budget():
    b = find_blowup(john_data(0.16), preset("john"), 5.0, spectrum(1), dr=0.1, cfl=0.5)
    assert b["censored"] and not b["confirmed"]


def test_linear_run_never_blows_up():
    res = evolve(InitialData(eps=1.0), preset("zero"), 5.0, spectrum(1), dr=0.1)
    assert res.blowup is None and not res.blew_up


# Neumann compatibility


def test_canonical_compatibility_examples():
    ex = canonical_examples()
    assert ex["quasi_x"].compatible
    assert not ex["quasi_dt_dtdy"].compatible
    assert ex["quasi_dt_dyy"].compatible
    assert all(r.agree for r in ex.values())
    assert ex["quasi_dt_dtdy"].witnesses


def test_compatibility_agreement_sample():
    res = compatibility_agreement(1000, seed=7)
    assert res["disagreements"] == 0
    assert 0 < res["compatible"] < 1000


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), j=st.integers(0, 3), l=st.integers(0, 3),
       size=st.floats(1e-9, 1e3))
def test_single_violation_found_by_both_routes(seed, j, l, size):
    B = np.zeros((5, 5, 5))
    A = np.random.default_rng(seed).normal(size=(4, 4))
    B[:4, 4, :4] = A
    B[4, :4, :4] = -A
    nl = Nonlinearity(B)
    assert compatibility_closed_form(nl.raw_B)[0]
    assert compatibility_sampled(nl.B, seed=seed)[0]
    B[j, 4, l] += size
    bad = Nonlinearity(B)
    assert not compatibility_closed_form(bad.raw_B)[0]
    assert not compatibility_sampled(bad.B, seed=seed)[0]


def test_evolve_refuses_incompatible_nonlinearity():
    with pytest.raises(CompatibilityRefused):
        evolve(InitialData(eps=0.01, f_modes={1: 1.0, 2: 1.0}), preset("quasi_dt_dtdy"), 1.0, spectrum(2))
    rep = check_neumann_compatibility(preset("quasi_dt_dyy"))
    assert rep.compatible and rep.closed_form and rep.sampled


def test_non_invariant_nonlinearity_rejected():
    R = np.zeros((5, 5))
    R[0, 1] = R[1, 0] = 1.0  # d_t u d_1 u picks a direction
    with pytest.raises(ValueError):
        evolve(InitialData(eps=0.1), Nonlinearity(R=R), 1.0, spectrum(1), dr=0.1)


# cutoff


def test_cutoff_endpoints_and_smoothness():
    cut = Cutoff(2.0)
    assert cut.eta(0.0) == 1.0 and cut.eta(cut.start) == 1.0
    assert cut.eta(cut.end) == pytest.approx(0.0, abs=1e-15) and cut.eta(10.0) == 0.0
    for t in (cut.start, cut.end):
        d = cut.derivatives(t, 4)
        np.testing.assert_allclose(d[1:], 0.0, atol=1e-10)
    s = np.linspace(cut.start, cut.end, 101)
    assert np.all(np.diff(cut(s)) <= 1e-15)


def test_commutator_vanishes_outside_transition():
    cut = Cutoff(1.0)
    u = np.ones(5)
    assert np.all(commutator(cut, cut.start - 0.1, u, u) == 0.0)
    assert np.all(commutator(cut, cut.end + 0.1, u, u) == 0.0)
    assert np.abs(commutator(cut, 0.5 * (cut.start + cut.end), u, u)).max() > 0


def test_cutoff_setup_tabulates_eta_u():
    data = InitialData(eps=0.1, B=1.0)
    spec = spectrum(1)
    setup = cutoff_setup(data, preset("john"), spec, reference_grid(data, 4.0, 0.1, 2.0), 0.05)
    U0, _ = setup.u0(0)
    np.testing.assert_allclose(U0, setup.U[0])
    U_end, Ut_end = setup.u0(len(setup.times) - 1)
    assert np.abs(U_end).max() < 1e-12 and np.abs(Ut_end).max() < 1e-12


# Picard iteration


def test_picard_linear_problem_converges_in_one_step():
    data = InitialData(eps=0.1, B=1.0)
    res = picard_iterate(data, preset("zero"), 6.0, spectrum(1), k_max=3, dr=0.1)
    assert res.A[0, 0] > 0
    assert np.all(res.A[1:] < 1e-14 * res.A[0, 0])


def test_picard_contracts_for_small_data():
    data = InitialData(eps=0.05, B=1.0, g_modes={1: 1.0})
    res = picard_iterate(data, preset("john"), 8.0, spectrum(1), k_max=4, dr=0.1)
    for L in range(3):
        assert np.all(res.contraction(L) <= 0.6)
    assert np.all(np.diff(res.A[:, 2]) < 0)


def test_picard_rejects_short_interval():
    with pytest.raises(ValueError):
        picard_iterate(InitialData(eps=0.1, B=1.0), preset("john"), 2.5, spectrum(1))


# snapshots


def test_snapshot_round_trip(tmp_path):
    spec = spectrum(3)
    data = InitialData(eps=1.0, B=2.0, f_modes={1: 1.0, 3: 0.5})
    res = evolve(data, preset("zero"), 2.0, spec, dr=0.1, snapshot_times=[0.0, 1.0, 2.0])
    path = tmp_path / "run.bin"
    n = write_snapshots(path, res.snapshots, res.meta)
    assert n == 3 * spec.J
    f = read_snapshots(path)
    assert f.header["J"] == 3 and f.header["dr"] == 0.1
    assert [s.t for s in f.snapshots] == [s.t for s in res.snapshots]
    for a, b in zip(f.snapshots, res.snapshots):
        assert np.array_equal(a.U, b.U) and np.array_equal(a.Ut, b.Ut)
    np.testing.assert_allclose(f.r, res.final.disc.rgrid.r)


def test_snapshot_file_layout(tmp_path):
    spec = spectrum(1)
    res = evolve(InitialData(eps=1.0), preset("zero"), 1.0, spec, dr=0.1, snapshot_times=[1.0])
    path = tmp_path / "one.bin"
    write_snapshots(path, res.snapshots, {"dr": 0.1})
    raw = path.read_bytes()
    assert raw[:8] == b"WGSNAP01"
    (n,) = struct.unpack("<I", raw[8:12])
    rec = np.frombuffer(raw[12 + n :], dtype="<f8")
    M1 = res.final.U.shape[1]
    assert rec.size == 2 + 2 * M1
    assert rec[0] == res.snapshots[0].t and rec[1] == 1.0


def test_snapshot_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTASNAP" + b"\0" * 16)
    with pytest.raises(ValueError):
        read_snapshots(bad)
    with pytest.raises(ValueError):
        write_snapshots(tmp_path / "x.bin", [], {})
    spec = spectrum(1)
    res = evolve(InitialData(eps=1.0), preset("zero"), 1.0, spec, dr=0.1, snapshot_times=[1.0])
    good = tmp_path / "good.bin"
    write_snapshots(good, res.snapshots, {"dr": 0.1})
    good.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_snapshots(good)


# mode commutation and the Dirichlet structure of d_y u


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
def test_mode_commutation_on_snapshots(bc):
    spec = spectrum(4, bc)
    data = InitialData(eps=1.0, B=2.0, f_modes={1: 1.0, 2: 0.5, 4: 0.3}, g_modes={3: 0.4})
    rep, _ = commutation_run(data, spec, 6.0, dr=0.1, cfl=0.5)
    assert rep.passed
    assert rep.relative < 1e-8
    assert len(rep.per_mode) == 4 and len(rep.times) == 3


def test_commutation_check_needs_triples():
    from waveguide.evolution.diagnostics import mode_commutation_check

    with pytest.raises(ValueError):
        mode_commutation_check([], spectrum(2), 0.1)


def test_dy_field_satisfies_dirichlet_conditions():
    spec = spectrum(4)
    data = InitialData(eps=1.0, B=2.0, f_modes={1: 1.0, 2: 0.7, 3: 0.2}, g_modes={4: 0.3})
    res = evolve(data, preset("zero"), 3.0, spec, dr=0.1)
    rep = dirichlet_trick_check(res.final.U, spec)
    assert rep.passed
    assert rep.endpoint_max < 1e-8 and rep.scale > 1e-3
    with pytest.raises(ValueError):
        dirichlet_trick_check(res.final.U, spectrum(4, "dirichlet"))


# energy inequality with a Duhamel oracle


def test_pulse_energy_matches_duhamel_closed_form():
    pf = PulseForcing()
    rep, _ = pulse_energy_run(pf, 8.0, spectrum(1), dr=0.1, cfl=0.5)
    assert rep.details["final_ratio"] == pytest.approx(pf.duhamel_ratio(), rel=1e-4)
    assert rep.ratio <= 1.0


def test_energy_inequality_without_forcing_is_degenerate():
    from waveguide.evolution.diagnostics import energy_inequality_check

    res = evolve(InitialData(eps=1.0), preset("zero"), 1.0, spectrum(1), dr=0.1)
    assert "rhs_degenerate" in energy_inequality_check(res.ledger).flags


# cutoff-driven decay runs


def test_driven_run_is_linear_in_forcing():
    data = InitialData(eps=1.0, B=1.0, f_modes={1: 1.0, 2: 1.0})
    spec = spectrum(2)
    a = driven_run(data, spec, 20.0)
    b = driven_run(data, spec, 20.0, scale=2.0)
    assert a.w_before == 0.0
    np.testing.assert_allclose(b.sup_grad, 2 * a.sup_grad, rtol=1e-10, atol=1e-300)
    assert driven_wave_decay(b).ratio == pytest.approx(driven_wave_decay(a).ratio, rel=1e-10)
    assert driven_kg_decay(b, 2).ratio == pytest.approx(driven_kg_decay(a, 2).ratio, rel=1e-10)


def test_kg_constant_is_uniform_in_mass():
    from waveguide.evolution.diagnostics import kg_uniformity

    res = kg_uniformity()
    assert res["uniform"] and res["growth"] <= 1.25
    assert all(math.isfinite(r) and r > 0 for r in res["ratios"])
    with pytest.raises(ValueError):
        kg_uniformity(mus=(1.5,))
