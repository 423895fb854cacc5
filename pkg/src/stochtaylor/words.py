"""Words over the alphabet {0, 1, ..., d} and permutation statistics.

A word is a plain tuple of ints. Letter 0 stands for the time direction and
counts twice in the scaling degree.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ConfigurationError

Word = tuple[int, ...]

GRADINGS = ("scaling", "length")


def as_word(letters: Iterable[int], dim: int | None = None) -> Word:
    w = tuple(int(i) for i in letters)
    if dim is not None and any(i < 0 or i > dim for i in w):
        raise ConfigurationError(f"word {w} has letters outside [0, {dim}]")
    return w


def zero_count(word: Sequence[int]) -> int:
    return sum(1 for i in word if i == 0)


def word_degree(word: Sequence[int]) -> tuple[int, int, int]:
    """Return ``(length, zero_count, scaling_degree)`` of a word."""
    k = len(word)
    n0 = zero_count(word)
    return k, n0, k + n0


def degree(word: Sequence[int], grading: str = "scaling") -> int:
    if grading == "scaling":
        return len(word) + zero_count(word)
    if grading == "length":
        return len(word)
    raise ConfigurationError(f"unknown grading {grading!r}")


def word_key(word: Word) -> tuple[int, Word]:
    """Sort key: shorter words first, then lexicographic."""
    return len(word), word


def check_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    p = tuple(int(x) for x in perm)
    if sorted(p) != list(range(1, len(p) + 1)):
        raise ConfigurationError(f"{p} is not a permutation of 1..{len(p)}")
    return p


def descent_count(perm: Sequence[int]) -> int:
    """Number of positions j with perm[j] > perm[j+1]."""
    return sum(1 for a, b in zip(perm, perm[1:]) if a > b)


def is_moment_word(word: Sequence[int]) -> bool:
    """True iff the word is a concatenation of blocks (0) and (i, i), i >= 1."""
    j = 0
    n = len(word)
    while j < n:
        if word[j] == 0:
            j += 1
        elif j + 1 < n and word[j + 1] == word[j]:
            j += 2
        else:
            return False
    return True


@lru_cache(maxsize=None)
def words_up_to(dim: int, depth: int, grading: str = "scaling") -> tuple[Word, ...]:
    """All non-empty words over {0..dim} with degree <= depth, in word_key order."""
    out = []
    for k in range(1, depth + 1):
        for w in itertools.product(range(dim + 1), repeat=k):
            if degree(w, grading) <= depth:
                out.append(w)
    return tuple(out)


def word_str(word: Word) -> str:
    return "".join(str(i) for i in word) if all(i < 10 for i in word) else ",".join(map(str, word))
