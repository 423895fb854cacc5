import math

import numpy as np
import pytest
from scipy import stats
from hypothesis import given, settings
import hypothesis.strategies as st

from stochtaylor.brownian import sample_brownian_path
from stochtaylor.errors import ConfigurationError, DomainError, ValidationError
from stochtaylor.flows import DrivenSystem, PolynomialVectorField
from stochtaylor.heat import (StructureConstants, a0_coefficient, a1_expansion_check, heat_density_mc,
                              kde_density_at, levy_area_cf, levy_area_cf_mc, sample_tangent_variable,
                              sample_tangent_variables, tangent_density_quadrature)

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def frame_system(matrix, x0=None):
    n = len(matrix)
    cols = [PolynomialVectorField.constant([row[k] for row in matrix]) for k in range(n)]
    return DrivenSystem((PolynomialVectorField.zero(n), *cols), x0 or (0,) * n)


def test_structure_constants_validation_and_presets():
    su2 = StructureConstants.su2_epsilon()
    assert su2.sum_sq == 6 and su2.expected_slope == -0.375
    assert su2.scaled(2).expected_slope == 4 * su2.expected_slope
    bad = np.zeros((3, 3, 3))
    bad[0, 1, 2] = 1
    with pytest.raises(ValidationError):
        StructureConstants(bad)
    bad[1, 0, 2] = -1
    with pytest.raises(ValidationError, match="omega_ik"):
        StructureConstants(bad)
    with pytest.raises(ConfigurationError):
        StructureConstants(np.zeros((2, 3, 3)))
    text = "d 3\n1 2 3 1\n2 1 3 -1\n1 3 2 -1\n3 1 2 1\n2 3 1 1\n3 2 1 -1\n"
    assert np.array_equal(StructureConstants.from_text(text).omega, su2.omega)
    with pytest.raises(ConfigurationError):
        StructureConstants.preset("so3")


def test_a0_examples():
    assert a0_coefficient(frame_system([[1, 0], [0, 1]])) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert a0_coefficient(frame_system([[2, 0], [0, 1]])) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    eye3 = [[int(i == j) for j in range(3)] for i in range(3)]
    assert a0_coefficient(frame_system(eye3)) == pytest.approx((2 * math.pi) ** -1.5, rel=1e-15)
    with pytest.raises(DomainError):
        a0_coefficient(frame_system([[1, 2], [2, 4]]))


def test_kde_examples():
    x = np.random.default_rng(0).standard_normal(1_000_000)
    est = kde_density_at(x, 0.0)
    assert est.value == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.02)
    pile = np.zeros((2000, 2))
    h = 1e-3
    assert kde_density_at(pile, [0, 0], bandwidth=h).value == pytest.approx(1 / (2 * math.pi * h * h))
    with pytest.raises(ConfigurationError):
        kde_density_at(x[:10], 0.0)
    half = kde_density_at(x, 0.0, bandwidth=est.bandwidth[0] / 2).value
    assert est.half_bandwidth_value == pytest.approx(half, rel=1e-12)


def test_flat_heat_kernel_normalization():
    sys = frame_system([[1, 0], [0, 1]])
    est = heat_density_mc(sys, None, 0.01, 200_000, seed=1)
    target = 1 / (2 * math.pi)
    assert abs(est.normalized - target) < max(0.05 * target, 4 * est.normalized_stderr)


def test_heat_stderr_scales_like_root_m():
    sys = frame_system([[1, 0], [0, 1]])
    a = heat_density_mc(sys, None, 0.01, 50_000, seed=2, bandwidth=0.03)
    b = heat_density_mc(sys, None, 0.01, 100_000, seed=2, bandwidth=0.03)
    assert a.normalized_stderr / b.normalized_stderr == pytest.approx(math.sqrt(2), rel=0.1)


def test_levy_cf_closed_form_cases():
    assert levy_area_cf(np.zeros((3, 3)), 1.0, [0.3, -1, 2]) == 1
    for a, t in [(1.0, 1.0), (0.5, 2.0), (2.5, 1.0)]:
        ta = t * a
        assert levy_area_cf(a * J, t, [0, 0]).real == pytest.approx(ta / math.sinh(ta), rel=1e-14)
    with pytest.raises(DomainError):
        levy_area_cf(4 * J, 1.0, [0, 0])
    with pytest.raises(ConfigurationError):
        levy_area_cf(np.eye(2), 1.0, [0, 0])


def test_levy_cf_matches_simulation():
    res = levy_area_cf_mc(J, 1.0, [0, 0], radius=0.3, samples=100_000, seed=5)
    exact = levy_area_cf(J, 1.0, [0, 0]).real
    # ball conditioning shifts the value by O(radius^2); allow it on top of MC noise
    assert abs(res.real - exact) < 4 * res.stderr + 0.02
    assert abs(res.imag) < 4 * res.stderr


def test_tangent_variable_zero_omega_is_brownian_endpoint():
    zero = StructureConstants.zero(3)
    th = sample_tangent_variable(zero, 0.4, 5, seed=3, index=7)
    assert np.array_equal(th, sample_brownian_path(3, 0.4, 5, seed=3, index=7).endpoint)
    rows = sample_tangent_variables(zero, 0.4, 10, level=5, seed=3)
    assert np.array_equal(rows[7], th)


def test_tangent_variable_first_coordinate_variance():
    t, M = 0.01, 100_000
    th = sample_tangent_variables(StructureConstants.su2_epsilon(), t, M, level=4, seed=8)
    var = th[:, 0].var(ddof=1)
    se = t * math.sqrt(2 / (M - 1))
    assert abs(var - t) < 4 * se + 3 * t * t


def test_quadrature_zero_omega_is_gaussian():
    res = tangent_density_quadrature(StructureConstants.zero(3), 0.02)
    assert res.value == (2 * math.pi * 0.02) ** -1.5


@pytest.mark.parametrize("t", [1e-3, 1e-2, 0.3])
def test_quadrature_matches_radial_integral(t):
    # for su(2) the reduced integrand is 1 / cosh(sqrt(t) |u| / 2), |u| ~ chi_3
    radial = stats.chi(3).expect(lambda r: 1 / math.cosh(math.sqrt(t) * r / 2), epsabs=1e-14, epsrel=1e-13)
    res = tangent_density_quadrature(StructureConstants.su2_epsilon(), t)
    assert res.normalized == pytest.approx(radial, rel=1e-11)


def test_quadrature_tends_to_one_at_small_t():
    su2 = StructureConstants.su2_epsilon()
    vals = [tangent_density_quadrature(su2, t).normalized for t in (1e-2, 1e-3, 1e-4)]
    assert abs(vals[2] - 1) < abs(vals[1] - 1) < abs(vals[0] - 1) < 0.01


def test_a1_slope_scaling():
    grid = np.linspace(1e-3, 1e-2, 4)
    assert abs(a1_expansion_check(StructureConstants.zero(3), grid).slope) < 1e-12
    one = a1_expansion_check(StructureConstants.su2_epsilon(), grid)
    two = a1_expansion_check(StructureConstants.su2_epsilon().scaled(2), grid / 4)
    assert two.slope == pytest.approx(4 * one.slope, rel=1e-6)
    assert one.rel_deviation < 0.02


@settings(max_examples=20)
@given(st.floats(0.05, 3.0), st.floats(0.05, 1.0))
def test_levy_cf_is_real_and_bounded(a, t):
    if t * a >= math.pi:
        return
    val = levy_area_cf(a * J, t, [0.0, 0.0])
    assert val.imag == 0 and 0 < val.real <= 1
