"""Acceptance suite: one test per criterion, each printing a single
PASS/FAIL line with the measured values and the pinned tolerances."""

import math

import numpy as np
import pytest

from waveguide.evolution import InitialData, canonical_examples, compatibility_agreement, preset
from waveguide.evolution.diagnostics import (
    REFERENCE_CFL,
    REFERENCE_DR,
    PulseForcing,
    commutation_run,
    convergence_order,
    energy_drift,
    pulse_refinement,
)
from waveguide.evolution.picard import picard_vs_direct
from waveguide.experiments import decay_experiment, lifespan_refinement
from waveguide.inequalities import FIELD_ESTIMATES, ODE_TOLERANCE, verify_suite
from waveguide.spectral import BC, BaseInterval, YGrid, build_spectrum, gram_matrix, plancherel_defect, project, reconstruct

# pinned tolerances
EIG_TOL = 1e-14
PLANCHEREL_TOL = 1e-10
GRAM_TOL = 1e-10
J_MAX = 64
DRIFT_MAX = 0.05
ODE_MAX = 1.0 + ODE_TOLERANCE
WAVE_BAND = (-1.15, -0.85)
KG_BAND = (-1.65, -1.35)
R2_MIN = 0.98
KAPPA_TOL = 0.15
ENERGY_DRIFT_MAX = 1e-6
ORDER_MIN = 1.9
PULSE_REFINE_TOL = 1e-2
DUHAMEL_TOL = 1e-4
COMPAT_SETS = 10_000
CONTRACTION_MAX = 0.6
AGREEMENT_MAX = 5.0
COMMUTATION_TOL = 1e-6


@pytest.fixture
def verdict(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
        assert ok, detail

    return emit


def test_criterion_1_spectral(verdict):
    base = BaseInterval(0.0, math.pi, BC.NEUMANN)
    eig_err = gram_err = plan_err = trip_err = 0.0
    rng = np.random.default_rng(0)
    for J in range(1, J_MAX + 1):
        spec = build_spectrum(base, J)
        k = np.arange(J, dtype=float)
        scale = np.maximum(k, 1.0)
        eig_err = max(eig_err, float((np.abs(spec.lambdas - k) / scale).max()),
                      float((np.abs(spec.lambdas**2 - k**2) / scale**2).max()))
        grid = YGrid.for_spectrum(spec)
        gram_err = max(gram_err, float(np.abs(gram_matrix(spec, grid) - np.eye(J)).max()))
        c = rng.normal(size=J)
        h = reconstruct(c, spec, grid)
        plan_err = max(plan_err, plancherel_defect(h, spec, grid))
        trip_err = max(trip_err, float(np.abs(project(h, spec, grid) - c).max() / np.abs(c).max()))
    ok = eig_err <= EIG_TOL and gram_err <= GRAM_TOL and max(plan_err, trip_err) <= PLANCHEREL_TOL
    verdict(1, "spectral correctness", ok,
            f"J<={J_MAX} eigenvalue err {eig_err:.2e} (<= {EIG_TOL:g} relative), Gram {gram_err:.2e} "
            f"(<= {GRAM_TOL:g}), Plancherel {plan_err:.2e}, round trip {trip_err:.2e} (<= {PLANCHEREL_TOL:g})")


def test_criterion_2_inequality_suite(verdict):
    res = verify_suite()
    rows = [r for r in res["rows"] if r["estimate"] in FIELD_ESTIMATES]
    finite = all(r["ratio"] is not None and math.isfinite(r["ratio"]) for r in rows)
    estimates = {r["estimate"] for r in rows}
    ok = (res["passed"] and finite and res["n_fields"] >= 20 and estimates == set(FIELD_ESTIMATES)
          and res["max_drift"] < DRIFT_MAX and res["max_ode_ratio"] <= ODE_MAX)
    verdict(2, "inequality suite", ok,
            f"{res['n_fields']} fields x {len(estimates)} estimates, all finite={finite}, "
            f"max drift {res['max_drift']:.2e} (< {DRIFT_MAX}), max ODE ratio {res['max_ode_ratio']:.9f} "
            f"(<= {ODE_MAX}), failures {len(res['failures'])}")


def test_criterion_3_decay_rates(verdict):
    res = decay_experiment(T=200.0, window=(20.0, 200.0))
    f = res["fits"]
    ok = (f["zero_mode"].within(WAVE_BAND) and f["mode2"].within(KG_BAND) and f["mixed_zero_mode"].within(WAVE_BAND)
          and f["mixed_mode2"].within(KG_BAND) and res["passed"])
    verdict(3, "decay rates on [20, 200]", ok,
            f"zero mode {f['zero_mode'].slope:.4f} in {WAVE_BAND}, KG mode {f['mode2'].slope:.4f} in {KG_BAND}, "
            f"mixed {f['mixed_zero_mode'].slope:.4f} / {f['mixed_mode2'].slope:.4f}, "
            f"d_y {f['mixed_dy'].slope:.4f}, checks {res['checks']}")


def test_criterion_4_lifespan_law(verdict):
    eps = (0.5, 0.38, 0.28, 0.21, 0.16)
    assert max(eps) >= 3 * min(eps)
    res = lifespan_refinement(eps, drs=(0.1, 0.05), r2_min=R2_MIN, kappa_tol=KAPPA_TOL, theta=10.0, rtol=0.01,
                              T_budget=300.0)
    fits = res["fits"]
    detail = "; ".join(f"dr={f.resolution:g} kappa {f.kappa:.4f} r2 {f.r2:.4f} monotone {f.monotone} "
                       f"confirmed {sum(p['confirmed'] for p in f.points)}/{len(f.points)}" for f in fits)
    verdict(4, "lifespan law", res["passed"],
            f"{detail}; kappa change {res['kappa_rel_change']:.3f} (<= {KAPPA_TOL}), r2 >= {R2_MIN}")


def test_criterion_5_energy(verdict):
    drift = energy_drift(T=50.0, dr=REFERENCE_DR, cfl=REFERENCE_CFL)["drift"]
    orders = convergence_order()["orders"]
    spec = build_spectrum(BaseInterval(0.0, math.pi), 1)
    pulse = pulse_refinement(PulseForcing(), 8.0, spec, drs=(0.1, 0.05))
    oracle = abs(pulse["final_ratio"][1] - pulse["duhamel_ratio"]) / pulse["duhamel_ratio"]
    ok = (drift < ENERGY_DRIFT_MAX and min(orders) >= ORDER_MIN and max(pulse["sup_ratio"]) <= 1.0
          and pulse["series_change"] <= PULSE_REFINE_TOL and oracle <= DUHAMEL_TOL)
    verdict(5, "energy", ok,
            f"drift on [0, 50] at dr={REFERENCE_DR}, cfl={REFERENCE_CFL}: {drift:.2e} (< {ENERGY_DRIFT_MAX:g}); "
            f"orders {[round(o, 3) for o in orders]} (>= {ORDER_MIN}); forced sup ratio "
            f"{[round(x, 5) for x in pulse['sup_ratio']]} (<= 1), series change dr 0.1 -> 0.05 "
            f"{pulse['series_change']:.1e} (<= {PULSE_REFINE_TOL:g}), final ratio vs closed form {oracle:.1e} "
            f"(<= {DUHAMEL_TOL:g})")


def test_criterion_6_compatibility(verdict):
    agree = compatibility_agreement(COMPAT_SETS, seed=0)
    ex = canonical_examples()
    canon = ex["quasi_x"].compatible and not ex["quasi_dt_dtdy"].compatible and ex["quasi_dt_dyy"].compatible
    canon &= all(r.agree for r in ex.values())
    ok = agree["disagreements"] == 0 and canon
    verdict(6, "compatibility checker", ok,
            f"{agree['sets']} random sets, {agree['disagreements']} disagreements ({agree['compatible']} compatible); "
            f"canonical all-x {ex['quasi_x'].compatible}, dt*dtdy {ex['quasi_dt_dtdy'].compatible}, "
            f"dt*dyy {ex['quasi_dt_dyy'].compatible}")


def test_criterion_7_picard(verdict):
    data = InitialData(eps=0.1, B=1.0, f_modes={1: 1.0}, g_modes={1: 1.0})
    spec = build_spectrum(BaseInterval(0.0, math.pi), 1)
    res = picard_vs_direct(data, preset("john"), 20.0, spec, k_max=6)
    worst = 0.0
    for L, ratios in res["contraction"].items():
        for k, q in enumerate(ratios, start=2):
            A_prev = res["picard"].A[k - 2, L]
            if math.isnan(q):
                assert A_prev == 0.0
                continue
            worst = max(worst, q)
    ok = worst <= CONTRACTION_MAX and res["ratio"] <= AGREEMENT_MAX
    verdict(7, "Picard contraction", ok,
            f"max A_k/A_(k-1) for k=2..6: {worst:.4f} (<= {CONTRACTION_MAX}); limit vs direct "
            f"{res['difference']:.2e} = {res['ratio']:.3f} x scheme error (<= {AGREEMENT_MAX:g})")


def test_criterion_8_mode_commutation(verdict):
    spec = build_spectrum(BaseInterval(0.0, math.pi), 4)
    data = InitialData(eps=1.0, B=2.0, f_modes={1: 1.0, 2: 0.5, 4: 0.3}, g_modes={3: 0.25})
    rep, _ = commutation_run(data, spec, 20.0, dr=REFERENCE_DR, cfl=REFERENCE_CFL, tolerance=COMMUTATION_TOL)
    ok = rep.passed and len(rep.per_mode) == spec.J
    verdict(8, "mode commutation", ok,
            f"J={spec.J} at t={[round(t, 3) for t in rep.times]}: relative residual {rep.relative:.2e} "
            f"(<= {COMMUTATION_TOL:g}), per mode {[f'{x:.1e}' for x in rep.per_mode]}")
