"""Nested brackets X_I, Lie-element tests and the BCH-Dynkin composition."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import ConfigurationError, CostError, DomainError
from .tensor import TensorSeries, ts_exp, ts_log, ts_mul
from .words import Word, degree, descent_count, word_key

__all__ = [
    "bracket", "expand_nested_bracket", "is_lie_element", "LieSeries",
    "lie_series_from_tensor", "bch_dynkin", "bch_beta_explicit",
]


def bracket(u: TensorSeries, v: TensorSeries) -> TensorSeries:
    """[U, V] = UV - VU."""
    return ts_mul(u, v) - ts_mul(v, u)


@lru_cache(maxsize=4096)
def _bracket_terms(word: Word) -> tuple[tuple[Word, int], ...]:
    """Signed words of [X_{i1},[X_{i2},...,X_{ik}]...] as (word, sign) pairs."""
    if len(word) == 1:
        return ((word, 1),)
    head = word[0]
    acc: dict[Word, int] = {}
    for w, s in _bracket_terms(word[1:]):
        acc[(head,) + w] = acc.get((head,) + w, 0) + s
        acc[w + (head,)] = acc.get(w + (head,), 0) - s
    return tuple((w, s) for w, s in sorted(acc.items(), key=lambda t: word_key(t[0])) if s)


def expand_nested_bracket(word: Sequence[int], dim: int, depth: int,
                          grading: str = "scaling") -> TensorSeries:
    """Tensor expansion of the right-nested commutator X_I."""
    word = tuple(word)
    if not word:
        raise DomainError("nested bracket of the empty word")
    return TensorSeries({w: s for w, s in _bracket_terms(word)}, dim, depth, grading)


def _dynkin_image(a: TensorSeries) -> dict[Word, object]:
    # sum_w a_w r(w), with r the right-to-left bracketing
    out: dict[Word, object] = {}
    for w, c in a.coeffs.items():
        for v, s in _bracket_terms(w):
            out[v] = out.get(v, 0) + s * c
    return out


def is_lie_element(a: TensorSeries, tol: float | None = None) -> bool:
    """Dynkin-Specht-Wever test: r(A_n) = n A_n on each length-n component.

    Exact comparison for exact scalars; with ``tol`` (or float scalars) the
    componentwise residual must be within tolerance.
    """
    if a.constant != 0:
        return False
    image = _dynkin_image(a)
    keys = set(image) | set(a.coeffs)
    if tol is None and a.is_exact:
        return all(image.get(w, 0) == len(w) * a[w] for w in keys)
    tol = 1e-9 if tol is None else tol
    return all(abs(image.get(w, 0) - len(w) * a[w]) <= tol * max(1.0, len(w)) for w in keys)


class LieSeries:
    """Linear combination of nested brackets X_I (coordinates are not unique)."""

    __slots__ = ("coeffs", "dim", "depth", "grading")

    def __init__(self, coeffs, dim, depth, grading="scaling"):
        clean = {}
        for w, c in coeffs.items():
            w = tuple(w)
            if not w:
                raise DomainError("LieSeries words must be non-empty")
            if c != 0 and degree(w, grading) <= depth:
                clean[w] = c
        self.coeffs = clean
        self.dim, self.depth, self.grading = dim, depth, grading

    def __getitem__(self, word):
        return self.coeffs.get(tuple(word), 0)

    def words(self):
        return sorted(self.coeffs, key=word_key)

    def items(self):
        return [(w, self.coeffs[w]) for w in self.words()]

    def expand(self) -> TensorSeries:
        acc: dict[Word, object] = {}
        for w, c in self.coeffs.items():
            for v, s in _bracket_terms(w):
                acc[v] = acc.get(v, 0) + s * c
        return TensorSeries(acc, self.dim, self.depth, self.grading)

    def exp(self) -> TensorSeries:
        return ts_exp(self.expand())

    def level(self, n: int) -> "LieSeries":
        return LieSeries({w: c for w, c in self.coeffs.items() if len(w) == n},
                         self.dim, self.depth, self.grading)

    def __eq__(self, other):
        if not isinstance(other, LieSeries):
            return NotImplemented
        return ((self.dim, self.depth, self.grading) == (other.dim, other.depth, other.grading)
                and self.coeffs == other.coeffs)

    __hash__ = None

    def __repr__(self):
        return f"LieSeries(dim={self.dim}, depth={self.depth}, {len(self.coeffs)} brackets)"

    def to_text(self) -> str:
        return TensorSeries._raw(self.coeffs, self).to_text()


def lie_series_from_tensor(a: TensorSeries) -> LieSeries:
    """Canonical bracket coordinates: coefficient of X_I is A(I) / |I|."""
    if not is_lie_element(a):
        raise DomainError("series is not a Lie element")
    exact = a.is_exact
    coeffs = {}
    for w, c in a.coeffs.items():
        coeffs[w] = c * (Fraction(1, len(w)) if exact else 1.0 / len(w))
    return LieSeries(coeffs, a.dim, a.depth, a.grading)


def bch_dynkin(vectors: Sequence[Sequence], depth: int, grading: str = "scaling") -> LieSeries:
    """Lie series L with exp(L) = prod_n exp(sum_i y_n^i X_i).

    Computed in the truncated tensor algebra: product of exponentials, log,
    then canonical bracket coordinates.
    """
    if not vectors:
        raise ConfigurationError("need at least one vector")
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise ConfigurationError("all vectors must have the same length d+1")
    dim = dims.pop() - 1
    prod = TensorSeries.one(dim, depth, grading)
    for y in vectors:
        prod = ts_mul(prod, ts_exp(TensorSeries.linear(y, depth, grading)))
    return lie_series_from_tensor(ts_log(prod))


@lru_cache(maxsize=16)
def strichartz_weights(k: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Pairs (slot -> source position map, weight) for all sigma in S_k.

    The weight is (-1)^e(sigma) / (k^2 binom(k-1, e(sigma))); slot m of the
    permuted word carries letter i_{sigma^{-1}(m)}.
    """
    if k > 7:
        raise CostError(f"k! permutation sum too large for k = {k}")
    out = []
    for sigma in itertools.permutations(range(1, k + 1)):
        e = descent_count(sigma)
        inv = [0] * k
        for pos, img in enumerate(sigma):
            inv[img - 1] = pos
        out.append((tuple(inv), Fraction((-1) ** e, k * k * math.comb(k - 1, e))))
    return tuple(out)


def bch_beta_explicit(vectors: Sequence[Sequence], word: Sequence[int]):
    """Closed-form permutation/block sum for the BCH-Dynkin coefficient.

    Letters of the permuted word are split into N consecutive (possibly empty)
    blocks; block nu is weighted by the product of y_nu over its letters and
    divided by the factorial of its length. The last block ends at k.
    """
    word = tuple(word)
    k = len(word)
    m = len(vectors)
    total = 0
    for inv, weight in strichartz_weights(k):
        w = tuple(word[inv[slot]] for slot in range(k))
        inner = 0
        for cuts in itertools.combinations_with_replacement(range(k + 1), m - 1):
            bounds = (0,) + cuts + (k,)
            term = 1
            for nu in range(m):
                lo, hi = bounds[nu], bounds[nu + 1]
                for slot in range(lo, hi):
                    term = term * vectors[nu][w[slot]]
                term = term * Fraction(1, math.factorial(hi - lo))
            inner = inner + term
        total = total + weight * inner
    return total
