import itertools
import math

import pytest
from hypothesis import given
import hypothesis.strategies as st

from stochtaylor.errors import ConfigurationError
from stochtaylor.words import (as_word, check_permutation, degree, descent_count, is_moment_word,
                               word_degree, word_str, words_up_to, zero_count)


def eulerian(k, j):
    # A(k, j) by the explicit alternating sum
    return sum((-1) ** i * math.comb(k + 1, i) * (j + 1 - i) ** k for i in range(j + 2))


@pytest.mark.parametrize("word, expected", [
    ((0,), (1, 1, 2)),
    ((), (0, 0, 0)),
    ((1, 0, 2), (3, 1, 4)),
])
def test_word_degree_examples(word, expected):
    assert word_degree(word) == expected


@pytest.mark.parametrize("perm, e", [((1, 2, 3), 0), ((2, 1), 1), ((3, 1, 2), 1)])
def test_descent_examples(perm, e):
    assert descent_count(perm) == e


@pytest.mark.parametrize("word, expected", [
    ((0,), True), ((1, 1, 0, 2, 2), True), ((1, 2), False), ((), True), ((1,), False), ((1, 0, 1), False),
])
def test_moment_word_examples(word, expected):
    assert is_moment_word(word) is expected


def test_degree_minus_length_counts_zeros_exhaustively():
    for d in range(1, 4):
        for k in range(0, 7 if d < 3 else 6):
            for w in itertools.product(range(d + 1), repeat=k):
                assert degree(w) - len(w) == zero_count(w)
                assert (degree(w) == len(w)) == (zero_count(w) == 0)


@pytest.mark.parametrize("k", range(1, 7))
def test_descent_distribution_is_eulerian(k):
    counts = [0] * k
    for p in itertools.permutations(range(1, k + 1)):
        counts[descent_count(p)] += 1
    assert counts == [eulerian(k, j) for j in range(k)]


@given(st.lists(st.integers(0, 3), max_size=8))
def test_moment_words_have_matching_parity(word):
    if is_moment_word(word):
        k, n0, _ = word_degree(word)
        assert (k - n0) % 2 == 0


def test_words_up_to_respects_grading_and_order():
    ws = words_up_to(2, 4)
    assert all(degree(w) <= 4 for w in ws)
    assert list(ws) == sorted(ws, key=lambda w: (len(w), w))
    assert (0, 0) in ws and (0, 0, 1) not in ws
    assert len(words_up_to(2, 3, "length")) == 3 + 9 + 27


def test_word_validation():
    with pytest.raises(ConfigurationError):
        as_word([0, 3], dim=2)
    with pytest.raises(ConfigurationError):
        check_permutation((0, 1, 2))
    with pytest.raises(ConfigurationError):
        degree((1,), "bogus")
    assert check_permutation([2, 1, 3]) == (2, 1, 3)
    assert word_str((1, 0, 2)) == "102"
