"""End-to-end acceptance checks, one test (or group) per criterion.

Each check reports through the ``acceptance`` fixture; the terminal summary
prints one PASS/FAIL line per criterion.
"""
from fractions import Fraction as F
import math

import numpy as np
import pytest

from stochtaylor.brownian import expected_signature_mc, moments_table
from stochtaylor.cli import run
from stochtaylor.clifford import (CurvatureTensor, FermionOperator, fermion_matrix, gauss_bonnet_model,
                                  local_chern_identity_check, supertrace_direct, supertrace_formula)
from stochtaylor.flows import (DrivenSystem, PolynomialVectorField, quartic_observable, rotation_benchmark,
                               strong_error_experiment, weak_error_experiment)
from stochtaylor.heat import (StructureConstants, a1_expansion_check, heat_density_mc, kde_density_at,
                              levy_area_cf, levy_area_cf_mc, sample_tangent_variables,
                              tangent_density_quadrature)
from stochtaylor.lie import bch_dynkin, is_lie_element
from stochtaylor.signature import chen_strichartz_series, log_signature, path_signature
from stochtaylor.tensor import TensorSeries, ts_exp, ts_mul

from conftest import random_rational_path

pytestmark = pytest.mark.slow

T_CASTELL = [2.0 ** -k for k in range(4, 10)]


def _paths():
    rng = np.random.default_rng(20240601)
    cases = []
    for _ in range(50):
        d = int(rng.integers(1, 4))
        segs = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 6))
        cases.append((random_rational_path(rng, d, segs), depth))
    return cases


# 1, 2: signatures -----------------------------------------------------------

def test_c01_chen_strichartz_reconstruction(acceptance):
    bad = 0
    for path, depth in _paths():
        sig = path_signature(path, depth)
        if chen_strichartz_series(sig).exp() != sig:
            bad += 1
    acceptance.check(1, "Chen-Strichartz reconstruction", bad == 0, f"{bad}/50 paths differ (exact)")
    assert bad == 0


def test_c02_log_signature_is_lie(acceptance):
    bad = sum(not is_lie_element(log_signature(path, depth)) for path, depth in _paths())
    acceptance.check(2, "log-signature Lie test", bad == 0, f"{bad}/50 log-signatures fail (exact)")
    assert bad == 0


# 3: BCH ----------------------------------------------------------------------

def test_c03_bch_dynkin(acceptance):
    rng = np.random.default_rng(3)
    bad = total = 0
    for m in range(1, 5):
        for depth in range(1, 6):
            for _ in range(2):
                d = int(rng.integers(1, 3))
                vectors = [tuple(F(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in range(d + 1))
                           for _ in range(m)]
                prod = TensorSeries.one(d, depth)
                for y in vectors:
                    prod = ts_mul(prod, ts_exp(TensorSeries.linear(y, depth)))
                total += 1
                bad += bch_dynkin(vectors, depth).exp() != prod
    acceptance.check(3, "BCH-Dynkin product of exponentials", bad == 0,
                     f"{bad}/{total} cases differ, m <= 4, N <= 5 (exact)")
    assert bad == 0


# 4: Stratonovich moments -------------------------------------------------------

def test_c04_stratonovich_moments(acceptance):
    est = expected_signature_mc(2, 1.0, 4, samples=100_000, level=10, seed=2024)
    z = np.array([abs(r["z_score"]) for r in moments_table(est, F(1))])
    over3, over4 = int(np.sum(z > 3)), int(np.sum(z > 4))
    ok = over4 == 0 and over3 <= 2
    acceptance.check(4, "Stratonovich moments (MC vs closed form)", ok,
                     f"{len(z)} words, max |z| = {z.max():.2f}, >3 SE: {over3}, >4 SE: {over4}")
    assert ok


# 5, 6: Castell rates -------------------------------------------------------------

@pytest.mark.parametrize("depth, lo, hi", [(1, 0.8, 1.2), (2, 1.3, 1.7)])
def test_c05_castell_strong_order(depth, lo, hi, acceptance):
    res = strong_error_experiment(rotation_benchmark(), depth, T_CASTELL, samples=2000)
    ok = lo <= res.slope <= hi
    acceptance.check(5, "Castell strong order", ok,
                     f"N = {depth}: slope {res.slope:.4f} (95% CI {res.slope_ci[0]:.3f}..{res.slope_ci[1]:.3f})"
                     f" in [{lo}, {hi}]")
    assert ok


def test_c06_weak_order(acceptance):
    res = weak_error_experiment(rotation_benchmark(), quartic_observable(2), 2, T_CASTELL, samples=2000)
    ok = res.slope >= 1.3
    acceptance.check(6, "weak order, N = 2", ok, f"slope {res.slope:.4f} >= 1.3")
    assert ok


# 7, 8: heat kernel ---------------------------------------------------------------

def test_c07_a0_flat_frame(acceptance):
    n = 2
    flat = DrivenSystem((PolynomialVectorField.zero(n), PolynomialVectorField.constant((1, 0)),
                         PolynomialVectorField.constant((0, 1))), (0, 0))
    est = heat_density_mc(flat, None, 0.01, 1_000_000, seed=7)
    dev = abs(est.normalized * 2 * math.pi - 1)
    ok = dev <= 0.05
    acceptance.check(7, "a0 flat frame", ok,
                     f"|t p (2 pi) - 1| = {dev:.4f} (SE {est.normalized_stderr * 2 * math.pi:.4f}) <= 0.05")
    assert ok


def test_c08_a1_quadrature_slope(acceptance):
    su2 = StructureConstants.su2_epsilon()
    res = a1_expansion_check(su2, np.linspace(1e-3, 1e-2, 8))
    ok = res.rel_deviation <= 0.02
    acceptance.check(8, "a1 coefficient", ok,
                     f"quadrature slope {res.slope:.6f} vs -0.375 (rel dev {res.rel_deviation:.4f} <= 0.02)")
    assert ok


def test_c08_a1_monte_carlo_pointwise(acceptance):
    su2 = StructureConstants.su2_epsilon()
    worst = 0.0
    for t in (1e-3, 5.5e-3, 1e-2):
        quad = tangent_density_quadrature(su2, t).normalized
        theta = sample_tangent_variables(su2, t, 4_000_000, level=4, seed=8)
        kde = kde_density_at(theta, np.zeros(3), factor=1.0)
        mc = kde.value * (2 * math.pi * t) ** 1.5
        worst = max(worst, abs(mc - quad) / quad)
    ok = worst <= 0.05
    acceptance.check(8, "a1 coefficient", ok, f"MC vs quadrature worst pointwise {worst:.4f} <= 0.05")
    assert ok


# 9: Levy area -----------------------------------------------------------------------

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_c09_levy_zero_matrix(acceptance):
    rng = np.random.default_rng(9)
    ok = all(levy_area_cf(np.zeros((d, d)), float(rng.uniform(0.1, 3)), rng.normal(size=d)) == 1
             for d in (1, 2, 3, 5))
    acceptance.check(9, "Levy-area characteristic function", ok, "A = 0 gives exactly 1")
    assert ok


def test_c09_levy_hyperbolic_determinant(acceptance):
    worst = 0.0
    for a, t in [(0.3, 1.0), (1.0, 1.0), (2.0, 0.7), (1.5, 2.0)]:
        ta = a * t
        worst = max(worst, abs(levy_area_cf(a * J, t, [0.0, 0.0]).real - ta / math.sinh(ta)))
    ok = worst <= 1e-12
    acceptance.check(9, "Levy-area characteristic function", ok,
                     f"d = 2 determinant factor vs ta/sinh(ta): max error {worst:.2e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="ta/sin(ta) exceeds 1 and cannot be a characteristic function "
                                       "of a real phase; the determinant factor is ta/sinh(ta)")
def test_c09_levy_literal_trigonometric_form(acceptance):
    a, t = 1.0, 1.0
    ta = a * t
    err = abs(levy_area_cf(a * J, t, [0.0, 0.0]).real - ta / math.sin(ta))
    ok = err <= 1e-12
    acceptance.check(9, "Levy-area characteristic function", ok,
                     f"d = 2 determinant factor vs ta/sin(ta) as stated: error {err:.3f} "
                     f"(ta/sin ta = {ta / math.sin(ta):.5f} > 1, |CF| <= 1)")
    assert ok


def test_c09_levy_monte_carlo(acceptance):
    t, radius, level = 1.0, 0.3, 8
    res = levy_area_cf_mc(J, t, [0.0, 0.0], radius, samples=200_000, level=level, seed=9)
    exact = levy_area_cf(J, t, [0.0, 0.0]).real
    # conditioning on a ball instead of the point: the conditional CF at endpoint x is
    # f0 exp(-c |x|^2 / 2t); averaging over the Gaussian restricted to the ball gives
    # f0 (1 - e^{-(1+c) u}) / ((1 + c)(1 - e^{-u})) with u = r^2 / 2t
    s = t * 1.0
    c = s / math.tanh(s) - 1
    u = radius ** 2 / (2 * t)
    ball = exact * (-math.expm1(-(1 + c) * u)) / ((1 + c) * -math.expm1(-u))
    # missing sub-segment areas of the piecewise-linear path
    budget = abs(ball - exact) + t * t / 2 ** level
    err = abs(res.real - exact)
    ok = err <= 4 * res.stderr + budget and abs(res.imag) <= 4 * res.stderr
    acceptance.check(9, "Levy-area characteristic function", ok,
                     f"MC {res.real:.5f} vs {exact:.5f}: |diff| {err:.5f} <= 4 SE {4 * res.stderr:.5f}"
                     f" + budget {budget:.5f} ({res.accepted} paths in ball)")
    assert ok


# 10, 11: fermions, supertrace, local identity ---------------------------------------

def test_c10_anticommutators(acceptance):
    bad = 0
    for d in range(1, 7):
        one = np.eye(1 << d, dtype=np.int64)
        a = [fermion_matrix("annihilation", i, d).matrix.astype(np.int64) for i in range(1, d + 1)]
        ad = [fermion_matrix("creation", i, d).matrix.astype(np.int64) for i in range(1, d + 1)]
        for i in range(d):
            for j in range(d):
                bad += not np.array_equal(a[i] @ ad[j] + ad[j] @ a[i], one * (i == j))
                bad += np.any(a[i] @ a[j] + a[j] @ a[i]) or np.any(ad[i] @ ad[j] + ad[j] @ ad[i])
    acceptance.check(10, "fermion relations and supertrace", bad == 0,
                     f"{bad} anticommutator failures for d <= 6 (integer matrices)")
    assert bad == 0


def _random_rational_operator(d, rng):
    n = 1 << d
    num = rng.integers(-5, 6, (n, n))
    den = rng.integers(1, 6, (n, n))
    m = np.empty((n, n), dtype=object)
    for idx in np.ndindex(n, n):
        m[idx] = F(int(num[idx]), int(den[idx]))
    return FermionOperator(m, d)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_c10_supertrace_formula(d, acceptance):
    rng = np.random.default_rng(100 + d)
    bad = 0
    for _ in range(100):
        op = _random_rational_operator(d, rng)
        bad += supertrace_formula(op) != supertrace_direct(op)
    acceptance.check(10, "fermion relations and supertrace", bad == 0,
                     f"d = {d}: {bad}/100 random rational operators differ")
    assert bad == 0


@pytest.mark.parametrize("d", [2, 4])
def test_c11_local_chern_identity(d, acceptance):
    rng = np.random.default_rng(1100 + d)
    bad_exact = sum(local_chern_identity_check(CurvatureTensor.random(d, rng)).residual != 0
                    for _ in range(100))
    worst = 0.0
    for _ in range(100):
        _, rhs, res = local_chern_identity_check(CurvatureTensor.random(d, rng, exact=False)).as_floats(d)
        worst = max(worst, res)
    ok = bad_exact == 0 and worst <= 1e-10
    acceptance.check(11, "local Chern identity", ok,
                     f"d = {d}: {bad_exact}/100 exact mismatches, float max residual {worst:.1e}")
    assert ok


# 12: Gauss-Bonnet -----------------------------------------------------------------------

def test_c12_gauss_bonnet(acceptance):
    s2, s4, torus = (gauss_bonnet_model(m) for m in ("sphere_d2", "sphere_d4", "flat_torus_d2"))
    ok = abs(s2.chi - 2) <= 1e-6 and abs(s4.chi - 2) <= 1e-6 and torus.chi == 0
    acceptance.check(12, "Gauss-Bonnet", ok,
                     f"chi(S2) = {s2.chi:.12f}, chi(S4) = {s4.chi:.12f}, chi(T2) = {torus.chi}")
    assert ok


# 13: determinism ---------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["castell", "--degree", "2", "--tgrid", "2^-4:2^-6:3:log", "--samples", "2100", "--level", "4",
     "--substeps", "2"],
    ["heat", "--tgrid", "1e-3:1e-2:3", "--samples", "2500", "--level", "3"],
    ["moments", "--dim", "2", "--degree", "3", "--samples", "2300", "--level", "4"],
])
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_c13_determinism(argv, fmt, tmp_path, acceptance):
    out = tmp_path / "out.dat"
    blobs = []
    for workers in ("1", "1", "3"):
        assert run(argv + ["--seed", "13", "--format", fmt, "--out", str(out), "--workers", workers]) == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    acceptance.check(13, "determinism", ok, f"{argv[0]} {fmt}: repeat and workers 1 vs 3 byte-identical")
    assert ok
