from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from stochtaylor.errors import ConfigurationError, CostError
from stochtaylor.lie import is_lie_element
from stochtaylor.signature import (PiecewiseLinearPath, chen_strichartz_coeffs, chen_strichartz_sampled,
                                   chen_strichartz_series, dense_to_series, iterated_integral_oracle,
                                   level_columns, log_signature, path_signature, read_path,
                                   segment_signature, signature_levels, signature_words)
from stochtaylor.tensor import TensorSeries, ts_exp, ts_mul
from stochtaylor.words import words_up_to

from conftest import rational_paths


def L_path():
    return PiecewiseLinearPath((0, 1, 2), ((1, 0), (0, 1)))


def reverse(path):
    durs = path.durations()[::-1]
    slopes = [tuple(-a for a in s) for s in path.slopes[::-1]]
    times = [F(0)]
    for h in durs:
        times.append(times[-1] + h)
    return PiecewiseLinearPath(tuple(times), tuple(slopes))


def test_segment_examples():
    s = segment_signature((1, 0), 1, 3)
    assert s[()] == 1 and s[(1, 1)] == F(1, 2)
    assert segment_signature((1, 2), 1, 3)[(1, 2)] == 1
    with pytest.raises(ConfigurationError):
        segment_signature((1, 0), 0, 3)


def test_straight_line_signature_is_exponential():
    a = (F(2, 3), F(-1, 2))
    path = PiecewiseLinearPath((0, F(3, 2)), (a,))
    gen = TensorSeries.linear((F(3, 2), a[0] * F(3, 2), a[1] * F(3, 2)), 5)
    assert path_signature(path, 5) == ts_exp(gen)
    assert log_signature(path, 5) == gen
    lam = chen_strichartz_coeffs(path_signature(path, 5))
    assert all(len(w) == 1 for w in lam)


def test_L_path_values():
    sig = path_signature(L_path(), 4)
    assert sig[(1, 2)] == 1 and sig[(2, 1)] == 0
    assert iterated_integral_oracle(L_path(), (1, 2)) == 1
    lg = log_signature(L_path(), 4)
    assert lg[(1, 2)] - lg[(2, 1)] == 1     # 1/2 [X_1, X_2] content is +1/2 per bracket
    lam = chen_strichartz_coeffs(sig)
    assert lam[(1, 2)] - lam[(2, 1)] == F(1, 2)


def test_oracle_examples():
    path = PiecewiseLinearPath((0, 3), ((F(1, 2),),))
    assert iterated_integral_oracle(path, (0,)) == 3
    line = PiecewiseLinearPath((0, 1), ((F(5, 3),),))
    assert iterated_integral_oracle(line, (1, 1)) == F(25, 18)
    with pytest.raises(CostError):
        iterated_integral_oracle(line, (1,) * 7)


@given(rational_paths(max_segments=3))
def test_oracle_agrees_with_signature(path):
    sig = path_signature(path, 4, "length")
    for w in words_up_to(path.dim, 4, "length"):
        assert iterated_integral_oracle(path, w) == sig[w]


@given(rational_paths(), st.integers(1, 5))
def test_chen_identity(path, depth):
    s = path.start + F(1, 3) * (path.end - path.start)
    left, right = path.split(s)
    assert ts_mul(path_signature(left, depth), path_signature(right, depth)) == path_signature(path, depth)
    assert path_signature(left.concat(right), depth) == path_signature(path, depth)


@given(rational_paths(), st.integers(1, 5))
def test_time_reversal_inverts(path, depth):
    # time still runs forward on the reversed path, so only spatial words invert
    prod = ts_mul(path_signature(path, depth), path_signature(reverse(path), depth))
    spatial = {w: c for w, c in prod.coeffs.items() if 0 not in w and c != 0}
    assert spatial == {(): 1}


@given(rational_paths(max_dim=2, max_segments=3), st.integers(1, 5))
def test_chen_strichartz_reconstruction(path, depth):
    sig = path_signature(path, depth)
    assert chen_strichartz_series(sig).exp() == sig
    assert is_lie_element(log_signature(path, depth))


@given(rational_paths(max_dim=2, max_segments=3))
def test_chen_strichartz_low_levels(path):
    sig = path_signature(path, 4, "length")
    lam = chen_strichartz_coeffs(sig)
    disp = path.displacement()
    for i in range(path.dim + 1):
        assert lam.get((i,), 0) == disp[i]
    for i in range(path.dim + 1):
        for j in range(path.dim + 1):
            area = sig[(i, j)] - sig[(j, i)]
            assert lam.get((i, j), 0) - lam.get((j, i), 0) == area / 2


def test_length_grading_reconstruction():
    path = PiecewiseLinearPath((0, 1, F(5, 2)), ((1, F(-1, 2)), (F(2, 3), 2)))
    sig = path_signature(path, 4, "length")
    assert chen_strichartz_series(sig).exp() == sig


def test_read_path_and_validation():
    path = read_path("# comment\n0 1 1 2\n1 3/2 -1 0\n")
    assert path.breakpoints == (0, 1, F(3, 2)) and path.slopes[1] == (-1, 0)
    assert path.displacement() == (F(3, 2), F(1, 2), 2)
    assert read_path(path.to_text()) == path
    with pytest.raises(ConfigurationError):
        read_path("0 1 1\n2 3 1\n")
    with pytest.raises(ConfigurationError):
        PiecewiseLinearPath((0, 0), ((1,),))
    with pytest.raises(ConfigurationError):
        PiecewiseLinearPath((0, 1, 2), ((1,), (1, 2)))


def test_batched_engines_match_exact():
    rng = np.random.default_rng(3)
    inc = rng.normal(size=(5, 7, 3))
    inc[:, :, 0] = 0.1
    levels = signature_levels(inc, 4)
    words = words_up_to(2, 5)
    sparse = signature_words(inc, words)
    for row in range(5):
        incs = [tuple(F(x) for x in seg) for seg in inc[row]]
        exact = path_signature(PiecewiseLinearPath.from_increments(
            [F(y[0]) for y in incs], [y[1:] for y in incs]), 5)
        for j, w in enumerate(words):
            assert abs(sparse[row, j] - float(exact[w])) < 1e-12
        exact_len = path_signature(PiecewiseLinearPath.from_increments(
            [F(y[0]) for y in incs], [y[1:] for y in incs]), 4, "length")
        dense = dense_to_series(levels, row, 4, "length")
        for w in words_up_to(2, 4, "length"):
            assert abs(dense[w] - float(exact_len[w])) < 1e-12
        lam_words, lam = chen_strichartz_sampled(inc[row:row + 1], 4)
        exact_lam = chen_strichartz_coeffs(exact.truncate(4))
        for j, w in enumerate(lam_words):
            assert abs(lam[0, j] - float(exact_lam.get(w, 0))) < 1e-12
    cols = level_columns(levels, [(1,), (1, 2)])
    assert np.allclose(cols[:, 0], inc[:, :, 1].sum(axis=1))


def test_batched_rows_do_not_depend_on_batch():
    rng = np.random.default_rng(4)
    inc = rng.normal(size=(6, 9, 3))
    words = words_up_to(2, 4)
    full = signature_words(inc, words)
    part = signature_words(inc[2:4], words)
    assert np.array_equal(full[2:4], part)
