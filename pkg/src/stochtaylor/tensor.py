"""Truncated free associative algebra R[[X_0, ..., X_d]].

Elements are sparse maps word -> scalar. Scalars are either exact
(``fractions.Fraction`` / ``int``) or ``float``; the arithmetic is written once
and works for both. Truncation is by scaling degree (letter 0 counts twice) or
by word length.
"""
from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import ConfigurationError, DomainError
from .words import GRADINGS, Word, degree, word_key

__all__ = ["TensorSeries", "ts_mul", "ts_exp", "ts_log"]


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction))


class TensorSeries:
    """Truncated element of the free associative algebra on letters 0..dim."""

    __slots__ = ("coeffs", "dim", "depth", "grading")

    def __init__(self, coeffs: Mapping[Word, object], dim: int, depth: int,
                 grading: str = "scaling"):
        if grading not in GRADINGS:
            raise ConfigurationError(f"unknown grading {grading!r}")
        if dim < 0 or depth < 0:
            raise ConfigurationError("dim and depth must be non-negative")
        clean = {}
        for w, c in coeffs.items():
            w = tuple(w)
            if any(i < 0 or i > dim for i in w):
                raise ConfigurationError(f"word {w} has letters outside [0, {dim}]")
            if c != 0 and degree(w, grading) <= depth:
                clean[w] = c
        self.coeffs = clean
        self.dim = dim
        self.depth = depth
        self.grading = grading

    @classmethod
    def _raw(cls, coeffs, like: "TensorSeries") -> "TensorSeries":
        # Caller guarantees words are in range and within depth.
        obj = cls.__new__(cls)
        obj.coeffs = {w: c for w, c in coeffs.items() if c != 0}
        obj.dim, obj.depth, obj.grading = like.dim, like.depth, like.grading
        return obj

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dim, depth, grading="scaling"):
        return cls({}, dim, depth, grading)

    @classmethod
    def one(cls, dim, depth, grading="scaling", unit=1):
        return cls({(): unit}, dim, depth, grading)

    @classmethod
    def letter(cls, i, dim, depth, grading="scaling", coeff=1):
        return cls({(i,): coeff}, dim, depth, grading)

    @classmethod
    def linear(cls, vector, depth, grading="scaling"):
        """sum_i vector[i] X_i, with dim = len(vector) - 1."""
        return cls({(i,): c for i, c in enumerate(vector)}, len(vector) - 1, depth, grading)

    # basic protocol -----------------------------------------------------
    def __getitem__(self, word) -> object:
        return self.coeffs.get(tuple(word), 0)

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.words())

    def words(self) -> list[Word]:
        return sorted(self.coeffs, key=word_key)

    def items(self):
        return [(w, self.coeffs[w]) for w in self.words()]

    @property
    def constant(self):
        return self.coeffs.get((), 0)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(c) for c in self.coeffs.values())

    def same_space(self, other: "TensorSeries") -> bool:
        return (self.dim, self.depth, self.grading) == (other.dim, other.depth, other.grading)

    def _check(self, other: "TensorSeries"):
        if not isinstance(other, TensorSeries):
            raise TypeError(f"expected TensorSeries, got {type(other).__name__}")
        if not self.same_space(other):
            raise ConfigurationError(
                "mismatched series: (dim, depth, grading) "
                f"{(self.dim, self.depth, self.grading)} vs {(other.dim, other.depth, other.grading)}")

    def homogeneous(self, n: int, by: str = "length") -> "TensorSeries":
        """Component made of the words of length (or degree) exactly n."""
        if by == "length":
            keep = {w: c for w, c in self.coeffs.items() if len(w) == n}
        else:
            keep = {w: c for w, c in self.coeffs.items() if degree(w, self.grading) == n}
        return TensorSeries._raw(keep, self)

    def truncate(self, depth: int) -> "TensorSeries":
        return TensorSeries(self.coeffs, self.dim, depth, self.grading)

    def map_coeffs(self, fn) -> "TensorSeries":
        return TensorSeries._raw({w: fn(c) for w, c in self.coeffs.items()}, self)

    def to_float(self) -> "TensorSeries":
        return self.map_coeffs(float)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, TensorSeries):
            return self + TensorSeries.one(self.dim, self.depth, self.grading, unit=other)
        self._check(other)
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, 0) + c
        return TensorSeries._raw(out, self)

    __radd__ = __add__

    def __neg__(self):
        return self.map_coeffs(lambda c: -c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TensorSeries):
            return ts_mul(self, other)
        return self.map_coeffs(lambda c: c * other)

    def __rmul__(self, other):
        return self.map_coeffs(lambda c: other * c)

    def __truediv__(self, scalar):
        if isinstance(scalar, int):
            scalar = Fraction(scalar)
        return self.map_coeffs(lambda c: c / scalar)

    def __pow__(self, k: int):
        out = TensorSeries.one(self.dim, self.depth, self.grading)
        for _ in range(k):
            out = ts_mul(out, self)
        return out

    def __eq__(self, other):
        if not isinstance(other, TensorSeries):
            return NotImplemented
        return self.same_space(other) and self.coeffs == other.coeffs

    __hash__ = None

    def max_abs_diff(self, other: "TensorSeries") -> float:
        self._check(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(float(self[w] - other[w])) for w in keys), default=0.0)

    def allclose(self, other: "TensorSeries", atol=1e-10) -> bool:
        return self.max_abs_diff(other) <= atol

    def __repr__(self):
        terms = " + ".join(f"{c}*X{''.join(map(str, w)) or '∅'}" for w, c in self.items()[:8])
        more = "" if len(self.coeffs) <= 8 else f" + ... ({len(self.coeffs)} terms)"
        return f"TensorSeries(dim={self.dim}, depth={self.depth}, {terms or '0'}{more})"

    # serialization ------------------------------------------------------
    def to_text(self) -> str:
        """Stable text form: header, then one ``letters : value`` line per word."""
        lines = [f"# dim={self.dim} depth={self.depth} grading={self.grading}"]
        for w, c in self.items():
            letters = " ".join(map(str, w)) if w else "-"
            if _is_exact(c):
                c = Fraction(c)
                val = f"{c.numerator}/{c.denominator}"
            else:
                val = repr(float(c))
            lines.append(f"{letters} : {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TensorSeries":
        meta = {}
        coeffs = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            letters, val = (s.strip() for s in line.split(":"))
            w = () if letters == "-" else tuple(int(x) for x in letters.split())
            coeffs[w] = Fraction(val) if "/" in val else float(val)
        try:
            return cls(coeffs, int(meta["dim"]), int(meta["depth"]), meta.get("grading", "scaling"))
        except KeyError as exc:
            raise ConfigurationError("series text is missing the '# dim=.. depth=..' header") from exc


def ts_mul(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    """Concatenation product, truncated at the common depth."""
    a._check(b)
    N, g = a.depth, a.grading
    by_deg = defaultdict(list)
    for v, y in b.coeffs.items():
        by_deg[degree(v, g)].append((v, y))
    allowed = sorted(by_deg)
    out: dict[Word, object] = {}
    for u, x in a.coeffs.items():
        room = N - degree(u, g)
        for dv in allowed:
            if dv > room:
                break
            for v, y in by_deg[dv]:
                w = u + v
                out[w] = out.get(w, 0) + x * y
    return TensorSeries._raw(out, a)


def _unit_like(a: TensorSeries) -> TensorSeries:
    return TensorSeries.one(a.dim, a.depth, a.grading)


def _recip(k: int, exact: bool):
    return Fraction(1, k) if exact else 1.0 / k


def ts_exp(a: TensorSeries) -> TensorSeries:
    """exp(A) = sum_k A^k / k!, requires a zero constant term."""
    if a.constant != 0:
        raise DomainError("exp needs a series with zero constant term")
    exact = a.is_exact
    one = _unit_like(a)
    # Horner: 1 + A(1 + A/2(1 + A/3(...)))
    out = one
    for k in range(a.depth, 0, -1):
        out = one + ts_mul(a, out) * _recip(k, exact)
    return out


def ts_log(a: TensorSeries) -> TensorSeries:
    """log(A) = sum_{k>=1} (-1)^(k+1) (A-1)^k / k, requires constant term 1."""
    if a.constant != 1:
        raise DomainError("log needs a series with constant term 1")
    exact = a.is_exact
    x = a - 1
    out = TensorSeries.zero(a.dim, a.depth, a.grading)
    power = _unit_like(a)
    for k in range(1, a.depth + 1):
        power = ts_mul(power, x)
        if not power.coeffs:
            break
        sign = 1 if k % 2 else -1
        out = out + power * (sign * _recip(k, exact))
    return out


def from_terms(terms: Iterable[tuple[Word, object]], dim, depth, grading="scaling") -> TensorSeries:
    acc: dict[Word, object] = {}
    for w, c in terms:
        acc[tuple(w)] = acc.get(tuple(w), 0) + c
    return TensorSeries(acc, dim, depth, grading)
