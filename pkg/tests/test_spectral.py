import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waveguide.spectral import (
    BC,
    BaseInterval,
    YGrid,
    build_spectrum,
    eigenfunction_values,
    gram_matrix,
    plancherel_defect,
    project,
    reconstruct,
    weyl_check,
)

PI = np.pi


def neumann(a, b, J):
    return build_spectrum(BaseInterval(a, b, BC.NEUMANN), J)


def dirichlet(a, b, J):
    return build_spectrum(BaseInterval(a, b, BC.DIRICHLET), J)


def test_base_interval_rejects_reversed_endpoints():
    with pytest.raises(ValueError):
        BaseInterval(1.0, 1.0)


def test_spectrum_closed_forms():
    np.testing.assert_allclose(neumann(0, PI, 4).lambdas, [0, 1, 2, 3], atol=1e-14)
    np.testing.assert_allclose(dirichlet(0, PI, 3).lambdas, [1, 2, 3], atol=1e-14)
    np.testing.assert_allclose(neumann(0, 2, 3).lambdas, [0, PI / 2, PI], atol=1e-14)


def test_zero_modes_rejected():
    with pytest.raises(ValueError):
        neumann(0, 1, 0)


def test_eigenfunction_samples():
    spec = neumann(0, PI, 4)
    grid = YGrid.trapezoid(spec.base, 33)
    np.testing.assert_allclose(eigenfunction_values(spec, 1, grid), 1 / np.sqrt(PI))
    assert eigenfunction_values(spec, 2, grid)[0] == pytest.approx(np.sqrt(2 / PI))
    dspec = dirichlet(0, PI, 3)
    mid = YGrid.trapezoid(dspec.base, 3)
    assert eigenfunction_values(dspec, 1, mid)[1] == pytest.approx(np.sqrt(2 / PI), abs=1e-15)
    with pytest.raises(ValueError):
        eigenfunction_values(spec, 5, grid)


def test_projection_examples():
    spec = neumann(0, PI, 6)
    grid = YGrid.for_spectrum(spec)
    c = project(np.full(len(grid), 3.0), spec, grid)
    np.testing.assert_allclose(c, [3 * np.sqrt(PI), 0, 0, 0, 0, 0], atol=1e-13)
    c = project(np.cos(grid.nodes), spec, grid)
    expected = np.zeros(6)
    expected[1] = np.sqrt(PI / 2)
    np.testing.assert_allclose(c, expected, atol=1e-13)


def test_projection_grid_mismatch():
    spec = neumann(0, PI, 4)
    grid = YGrid.trapezoid(spec.base, 11)
    with pytest.raises(ValueError):
        project(np.zeros(12), spec, grid)
    other = YGrid.trapezoid(BaseInterval(0, 1), 11)
    with pytest.raises(ValueError):
        project(np.zeros(11), spec, other)


def _exp_tail_oracle(J):
    # cosine coefficients of exp(-y) on [0, 1] in closed form
    k = np.arange(1, J)
    c0 = 1 - np.exp(-1)
    ck = np.sqrt(2) * (1 - (-1.0) ** k * np.exp(-1)) / (1 + (k * PI) ** 2)
    norm2 = (1 - np.exp(-2)) / 2
    return (norm2 - c0**2 - np.sum(ck**2)) / norm2


@pytest.mark.parametrize("J", [16, 32])
def test_plancherel_exp_matches_tail_oracle(J):
    spec = neumann(0, 1, J)
    defects = []
    for n in (4001, 16001):
        grid = YGrid.trapezoid(spec.base, n)
        defects.append(plancherel_defect(np.exp(-grid.nodes), spec, grid))
    oracle = _exp_tail_oracle(J)
    # quadrature of h^2 and of the coefficients agree across grid levels
    assert defects[0] == pytest.approx(defects[1], rel=1e-2)
    assert defects[1] == pytest.approx(oracle, rel=1e-3)


def test_plancherel_exp_below_1e6_once_tail_is_resolved():
    # at J = 16 the truncation floor is 4.5e-6; J = 32 clears 1e-6
    spec = neumann(0, 1, 32)
    grid = YGrid.trapezoid(spec.base, 4001)
    assert plancherel_defect(np.exp(-grid.nodes), spec, grid) < 1e-6


def test_plancherel_single_and_bandlimited():
    spec = neumann(0, PI, 8)
    grid = YGrid.for_spectrum(spec)
    assert plancherel_defect(eigenfunction_values(spec, 2, grid), spec, grid) < 1e-12
    h = np.cos(grid.nodes) + np.cos(2 * grid.nodes)
    assert plancherel_defect(h, spec, grid) < 1e-12
    assert plancherel_defect(np.zeros(len(grid)), spec, grid) == 0.0


def test_plancherel_decreases_with_modes():
    base = BaseInterval(0, 1)
    grid = YGrid.trapezoid(base, 4001)
    bump = np.exp(-((grid.nodes - 0.3) ** 2) / 0.02)
    d4 = plancherel_defect(bump, build_spectrum(base, 4), grid)
    d32 = plancherel_defect(bump, build_spectrum(base, 32), grid)
    assert d32 < d4


def test_reconstruct_examples():
    spec = neumann(0, 2, 5)
    grid = YGrid.for_spectrum(spec)
    np.testing.assert_allclose(reconstruct([1, 0, 0, 0, 0], spec, grid), 1 / np.sqrt(2))
    assert np.all(reconstruct(np.zeros(5), spec, grid) == 0)


@settings(max_examples=30, deadline=None)
@given(
    J=st.integers(1, 64),
    bc=st.sampled_from([BC.NEUMANN, BC.DIRICHLET]),
    seed=st.integers(0, 2**31),
)
def test_round_trip_identity(J, bc, seed):
    spec = build_spectrum(BaseInterval(-0.5, 1.7, bc), J)
    grid = YGrid.for_spectrum(spec)
    c = np.random.default_rng(seed).normal(size=J)
    back = project(reconstruct(c, spec, grid), spec, grid)
    assert np.max(np.abs(back - c)) < 1e-10


@pytest.mark.parametrize("bc", [BC.NEUMANN, BC.DIRICHLET])
def test_gram_is_identity(bc):
    spec = build_spectrum(BaseInterval(0, 3, bc), 64)
    G = gram_matrix(spec, YGrid.for_spectrum(spec))
    assert np.max(np.abs(G - np.eye(64))) < 1e-10


@pytest.mark.parametrize("bc", [BC.NEUMANN, BC.DIRICHLET])
def test_eigen_relation_second_order(bc):
    spec = build_spectrum(BaseInterval(0, 2, bc), 5)
    errs = []
    for n in (101, 201, 401):
        grid = YGrid.trapezoid(spec.base, n)
        h = grid.nodes[1] - grid.nodes[0]
        e = eigenfunction_values(spec, 4, grid)
        d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / h**2
        errs.append(np.max(np.abs(d2 + spec.lambdas[3] ** 2 * e[1:-1])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_boundary_conditions():
    spec = neumann(0, 1, 6)
    errs = []
    for n in (101, 201, 401):
        grid = YGrid.trapezoid(spec.base, n)
        h = grid.nodes[1] - grid.nodes[0]
        e = eigenfunction_values(spec, 5, grid)
        left = (-3 * e[0] + 4 * e[1] - e[2]) / (2 * h)
        right = (3 * e[-1] - 4 * e[-2] + e[-3]) / (2 * h)
        errs.append(max(abs(left), abs(right)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 1.9)
    dspec = dirichlet(0, 1, 6)
    grid = YGrid.trapezoid(dspec.base, 51)
    for j in range(1, 7):
        e = eigenfunction_values(dspec, j, grid)
        assert e[0] == 0.0 and e[-1] == 0.0


@pytest.mark.parametrize(
    "spec",
    [neumann(0, PI, 10), neumann(0, 2 * PI, 10), dirichlet(0, 1, 5)],
)
def test_weyl_ratio_exact(spec):
    assert weyl_check(spec)["max_deviation"] < 1e-14
