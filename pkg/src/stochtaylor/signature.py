"""Signatures of piecewise-linear paths and Chen-Strichartz coordinates.

Letter 0 is time (x^0_t = t); letters 1..d are the path coordinates. Exact
rational paths give exact signatures. ``signature_levels`` is the dense,
batched float engine used by the Monte Carlo code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, CostError
from .lie import LieSeries, strichartz_weights
from .tensor import TensorSeries, ts_log, ts_mul
from .words import Word, words_up_to

__all__ = [
    "PiecewiseLinearPath", "segment_signature", "increments_signature", "path_signature",
    "iterated_integral_oracle", "chen_strichartz_coeffs", "chen_strichartz_series",
    "log_signature", "read_path", "signature_levels", "level_columns",
    "chen_strichartz_batch", "chen_strichartz_sampled", "signature_words", "dense_to_series",
    "word_index",
]


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Path in R^d with slope ``slopes[m]`` on [breakpoints[m], breakpoints[m+1])."""

    breakpoints: tuple
    slopes: tuple

    def __post_init__(self):
        bp = tuple(self.breakpoints)
        sl = tuple(tuple(a) for a in self.slopes)
        if len(bp) != len(sl) + 1 or not sl:
            raise ConfigurationError("need len(breakpoints) == len(slopes) + 1 >= 2")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise ConfigurationError("breakpoints must be strictly increasing")
        if len({len(a) for a in sl}) != 1:
            raise ConfigurationError("slope dimension must be constant across segments")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)

    @classmethod
    def from_points(cls, times, points):
        """Path through ``points[m]`` at ``times[m]`` (points are in R^d)."""
        slopes = []
        for m in range(len(times) - 1):
            dt = times[m + 1] - times[m]
            slopes.append(tuple((q - p) / dt for p, q in zip(points[m], points[m + 1])))
        return cls(tuple(times), tuple(slopes))

    @classmethod
    def from_increments(cls, dts, dxs, start=0):
        times = [start]
        for dt in dts:
            times.append(times[-1] + dt)
        return cls(tuple(times), tuple(tuple(x / dt for x in dx) for dt, dx in zip(dts, dxs)))

    @property
    def dim(self) -> int:
        return len(self.slopes[0])

    @property
    def n_segments(self) -> int:
        return len(self.slopes)

    @property
    def start(self):
        return self.breakpoints[0]

    @property
    def end(self):
        return self.breakpoints[-1]

    def durations(self):
        return [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]

    def increments(self) -> list[tuple]:
        """Per-segment increments (dt, a^1 dt, ..., a^d dt) of the time-extended path."""
        return [(dt,) + tuple(a_i * dt for a_i in a) for dt, a in zip(self.durations(), self.slopes)]

    def displacement(self) -> tuple:
        inc = self.increments()
        return tuple(sum(col) for col in zip(*inc))

    def split(self, s) -> tuple["PiecewiseLinearPath", "PiecewiseLinearPath"]:
        """Restrictions to [start, s] and [s, end]."""
        if not self.start < s < self.end:
            raise ConfigurationError("split point must be interior")
        left_t, left_a, right_t, right_a = [self.start], [], [s], []
        for (a, b), sl in zip(zip(self.breakpoints, self.breakpoints[1:]), self.slopes):
            if b <= s:
                left_t.append(b)
                left_a.append(sl)
            elif a >= s:
                right_t.append(b)
                right_a.append(sl)
            else:
                left_t.append(s)
                left_a.append(sl)
                right_t.append(b)
                right_a.append(sl)
        return PiecewiseLinearPath(tuple(left_t), tuple(left_a)), PiecewiseLinearPath(tuple(right_t), tuple(right_a))

    def concat(self, other: "PiecewiseLinearPath") -> "PiecewiseLinearPath":
        shift = self.end - other.start
        times = self.breakpoints + tuple(t + shift for t in other.breakpoints[1:])
        return PiecewiseLinearPath(times, self.slopes + other.slopes)

    def to_text(self) -> str:
        rows = []
        for (a, b), sl in zip(zip(self.breakpoints, self.breakpoints[1:]), self.slopes):
            rows.append(" ".join(str(v) for v in (a, b) + sl))
        return "\n".join(rows) + "\n"


def read_path(text: str) -> PiecewiseLinearPath:
    """Parse ``t_start t_end a_1 ... a_d`` lines; entries may be rational or decimal."""
    times, slopes = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        vals = [Fraction(tok) for tok in line.split()]
        if len(vals) < 3:
            raise ConfigurationError(f"line {lineno}: need t_start t_end and at least one slope")
        t0, t1, a = vals[0], vals[1], tuple(vals[2:])
        if not times:
            times.append(t0)
        elif t0 != times[-1]:
            raise ConfigurationError(f"line {lineno}: segment starts at {t0}, previous ended at {times[-1]}")
        times.append(t1)
        slopes.append(a)
    if not slopes:
        raise ConfigurationError("empty path file")
    return PiecewiseLinearPath(tuple(times), tuple(slopes))


def _div(x, n: int):
    return Fraction(x) / n if isinstance(x, (int, Fraction)) else x / n


def increments_signature(increments: Sequence[Sequence], depth: int, grading="scaling") -> TensorSeries:
    """prod_n exp(sum_i y_n^i X_i) with the closed-form coefficient of each factor."""
    dim = len(increments[0]) - 1
    words = words_up_to(dim, depth, grading)
    out = TensorSeries.one(dim, depth, grading)
    for y in increments:
        coeffs = {(): 1}
        for w in words:
            c = 1
            for i in w:
                c = c * y[i]
            coeffs[w] = _div(c, math.factorial(len(w)))
        out = ts_mul(out, TensorSeries(coeffs, dim, depth, grading))
    return out


def segment_signature(slope: Sequence, dt, depth: int, grading="scaling") -> TensorSeries:
    """exp(dt * (X_0 + sum_i a^i X_i)) for one linear segment."""
    if not dt > 0:
        raise ConfigurationError("segment duration must be positive")
    return increments_signature([(dt,) + tuple(a * dt for a in slope)], depth, grading)


def path_signature(path: PiecewiseLinearPath, depth: int, grading="scaling") -> TensorSeries:
    return increments_signature(path.increments(), depth, grading)


def log_signature(path: PiecewiseLinearPath, depth: int, grading="scaling") -> TensorSeries:
    return ts_log(path_signature(path, depth, grading))


def iterated_integral_oracle(path: PiecewiseLinearPath, word: Sequence[int]):
    """Iterated integral of ``word`` by exact per-segment polynomial integration.

    Independent of the tensor algebra: F_j(s) = int_0^s F_{j-1} dx^{i_j},
    with each F_j stored as a polynomial in local time on every segment.
    """
    word = tuple(word)
    if len(word) > 6:
        raise CostError("oracle limited to words of length <= 6")
    durs = path.durations()
    slopes = [(1,) + tuple(a) for a in path.slopes]
    # F_0 = 1 on every segment
    prev = [[1] for _ in durs]
    for letter in word:
        cur = []
        value_at_start = 0
        for m, dt in enumerate(durs):
            rate = slopes[m][letter]
            poly = [value_at_start]
            for p, c in enumerate(prev[m]):
                poly.append(_div(rate * c, p + 1))
            cur.append(poly)
            value_at_start = sum(c * dt ** p for p, c in enumerate(poly))
        prev = cur
    if not word:
        return 1
    last = prev[-1]
    return sum(c * durs[-1] ** p for p, c in enumerate(last))


def chen_strichartz_coeffs(sig: TensorSeries, depth: int | None = None) -> dict[Word, object]:
    """Lambda_I = sum_sigma w(sigma) * sig(permuted I) for all words of degree <= depth."""
    depth = sig.depth if depth is None else depth
    out = {}
    for word in words_up_to(sig.dim, depth, sig.grading):
        k = len(word)
        total = 0
        for inv, weight in strichartz_weights(k):
            c = sig[tuple(word[inv[m]] for m in range(k))]
            if c != 0:
                total = total + weight * c
        if total != 0:
            out[word] = total
    return out


def chen_strichartz_series(sig: TensorSeries) -> LieSeries:
    return LieSeries(chen_strichartz_coeffs(sig), sig.dim, sig.depth, sig.grading)


# dense batched engine -------------------------------------------------------

def signature_levels(increments: np.ndarray, depth: int) -> list[np.ndarray]:
    """Dense signatures of a batch of piecewise-linear paths, truncated by word length.

    ``increments`` has shape (batch, segments, A) where A = d + 1 letters (column 0
    is time). Returns ``[S_1, ..., S_depth]`` with ``S_k`` of shape (batch, A**k);
    word (w_1..w_k) sits at base-A index sum w_j A^(k-j). Only elementwise
    operations are used, so each row is independent of the batch composition.
    """
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 3:
        raise ConfigurationError("increments must have shape (batch, segments, letters)")
    batch, nseg, A = inc.shape
    levels = [np.zeros((batch, A ** k)) for k in range(1, depth + 1)]
    for s in range(nseg):
        y = inc[:, s, :]
        for n in range(depth, 0, -1):
            acc = y / n
            for j in range(1, n):
                acc = ((levels[j - 1] + acc)[:, :, None] * y[:, None, :]).reshape(batch, -1) / (n - j)
            levels[n - 1] += acc
    return levels


def word_index(word: Word, letters: int) -> int:
    idx = 0
    for i in word:
        idx = idx * letters + i
    return idx


def level_columns(levels: list[np.ndarray], words: Sequence[Word]) -> np.ndarray:
    """Gather the coefficients of ``words`` into an array of shape (batch, len(words))."""
    A = levels[0].shape[1]
    cols = [levels[len(w) - 1][:, word_index(w, A)] for w in words]
    return np.stack(cols, axis=1)


def chen_strichartz_batch(levels: list[np.ndarray], words: Sequence[Word]) -> np.ndarray:
    """Lambda_I for each word, batched; same weights as ``chen_strichartz_coeffs``."""
    A = levels[0].shape[1]
    out = np.zeros((levels[0].shape[0], len(words)))
    for col, word in enumerate(words):
        k = len(word)
        merged: dict[int, Fraction] = {}
        for inv, weight in strichartz_weights(k):
            idx = word_index(tuple(word[inv[m]] for m in range(k)), A)
            merged[idx] = merged.get(idx, 0) + weight
        for idx in sorted(merged):
            if merged[idx] != 0:
                out[:, col] += float(merged[idx]) * levels[k - 1][:, idx]
    return out


def dense_to_series(levels: list[np.ndarray], row: int, depth: int, grading="scaling") -> TensorSeries:
    A = levels[0].shape[1]
    words = words_up_to(A - 1, depth, grading)
    coeffs = {(): 1.0}
    for w in words:
        coeffs[w] = float(levels[len(w) - 1][row, word_index(w, A)])
    return TensorSeries(coeffs, A - 1, depth, grading)


def _factor_closure(words: Sequence[Word]) -> list[Word]:
    closed = set()
    for w in words:
        for a in range(len(w)):
            for b in range(a + 1, len(w) + 1):
                closed.add(tuple(w[a:b]))
    return sorted(closed, key=lambda w: (len(w), w))


def signature_words(increments: np.ndarray, words: Sequence[Word]) -> np.ndarray:
    """Batched signature coefficients for a chosen set of words.

    Sparse counterpart of ``signature_levels``: only the contiguous subwords
    of ``words`` are tracked, which makes scaling-degree truncations much
    cheaper than dense word-length levels. Returns shape (batch, len(words)).
    """
    inc = np.asarray(increments, dtype=float)
    batch, nseg, A = inc.shape
    tracked_sorted = _factor_closure(words)
    pos = {w: j for j, w in enumerate(tracked_sorted)}
    n = len(tracked_sorted)
    parent = [pos.get(w[:-1], -1) for w in tracked_sorted]
    last = [w[-1] for w in tracked_sorted]
    inv_len = [1.0 / len(w) for w in tracked_sorted]
    splits = [[(pos[w[:k]], pos[w[k:]]) for k in range(1, len(w))] for w in tracked_sorted]
    order = sorted(range(n), key=lambda j: -len(tracked_sorted[j]))

    S = np.zeros((n, batch))
    E = np.zeros((n, batch))
    tmp = np.empty(batch)
    ys = np.ascontiguousarray(inc.transpose(1, 2, 0))  # (segments, letters, batch)
    for s in range(nseg):
        y = ys[s]
        for j in range(n):
            if parent[j] < 0:
                np.multiply(y[last[j]], inv_len[j], out=E[j])
            else:
                np.multiply(E[parent[j]], y[last[j]], out=E[j])
                E[j] *= inv_len[j]
        for j in order:
            row = S[j]
            row += E[j]
            for u, v in splits[j]:
                np.multiply(S[u], E[v], out=tmp)
                row += tmp
    return np.ascontiguousarray(S[[pos[tuple(w)] for w in words]].T)


def chen_strichartz_sampled(increments: np.ndarray, depth: int,
                            grading: str = "scaling") -> tuple[list[Word], np.ndarray]:
    """Lambda_I for every word of degree <= depth, for a batch of paths.

    Returns (words, values) with values of shape (batch, len(words)).
    Permutations preserve the degree, so one sparse signature pass over the
    same word set supplies every coefficient the weights need.
    """
    inc = np.asarray(increments, dtype=float)
    words = words_up_to(inc.shape[2] - 1, depth, grading)
    sig = signature_words(inc, words)
    col = {w: j for j, w in enumerate(words)}
    out = np.zeros((inc.shape[0], len(words)))
    for j, word in enumerate(words):
        k = len(word)
        merged: dict[Word, Fraction] = {}
        for inv, weight in strichartz_weights(k):
            v = tuple(word[inv[m]] for m in range(k))
            merged[v] = merged.get(v, 0) + weight
        for v in sorted(merged):
            if merged[v] != 0:
                out[:, j] += float(merged[v]) * sig[:, col[v]]
    return list(words), out
