"""Piecewise-linear Brownian samples and Brownian signature moments.

Stratonovich iterated integrals are realized as signatures of the linear
interpolation of Brownian motion on a dyadic grid (Wong-Zakai). Sample ``i``
is drawn from the stream of chunk ``i // CHUNK`` so any sample can be
regenerated on its own and pooled estimates do not depend on worker count.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial

import numpy as np

from .errors import ConfigurationError
from .parallel import CHUNK, chunk_bounds, chunk_rng, run_chunks
from .signature import PiecewiseLinearPath, signature_words
from .tensor import TensorSeries, ts_exp
from .words import is_moment_word, word_degree, word_str, words_up_to

__all__ = [
    "BrownianSample", "sample_brownian_path", "standard_normals", "brownian_increments",
    "stratonovich_moment", "expected_signature_exact", "expected_signature_mc",
    "MomentEstimate", "moments_table",
]


def _check(dim, horizon, level):
    if dim < 1:
        raise ConfigurationError("dimension must be >= 1")
    if not horizon > 0:
        raise ConfigurationError("time horizon must be positive")
    if not 1 <= level <= 24:
        raise ConfigurationError("refinement level must be in [1, 24]")


def standard_normals(seed: int, start: int, stop: int, steps: int, dim: int,
                     stream: int = 0) -> np.ndarray:
    """Standard normals of shape (stop - start, steps, dim) for samples start..stop-1.

    ``stream`` separates unrelated experiments sharing a seed.
    """
    out = np.empty((stop - start, steps, dim))
    filled = 0
    for c in range(start // CHUNK, (stop - 1) // CHUNK + 1):
        lo = c * CHUNK
        need_to = min(stop, lo + CHUNK)
        z = chunk_rng(seed, stream, c).standard_normal((need_to - lo, steps, dim))
        take = z[max(start, lo) - lo:]
        out[filled:filled + len(take)] = take
        filled += len(take)
    return out


def brownian_increments(dim, horizon, level, seed, start, stop, stream=0) -> np.ndarray:
    """Brownian increments over the 2**level dyadic steps, shape (n, 2**level, dim)."""
    steps = 2 ** level
    return standard_normals(seed, start, stop, steps, dim, stream) * math.sqrt(horizon / steps)


@dataclass(frozen=True)
class BrownianSample:
    dim: int
    horizon: float
    level: int
    seed: int
    index: int
    increments: np.ndarray

    @property
    def n_segments(self) -> int:
        return self.increments.shape[0]

    @property
    def step(self) -> float:
        return self.horizon / self.n_segments

    @property
    def endpoint(self) -> np.ndarray:
        return self.increments.sum(axis=0)

    def time_increments(self) -> np.ndarray:
        """Increments with the time letter prepended, shape (segments, dim + 1)."""
        h = np.full((self.n_segments, 1), self.step)
        return np.hstack([h, self.increments])

    @property
    def path(self) -> PiecewiseLinearPath:
        h = self.step
        times = tuple(m * h for m in range(self.n_segments + 1))
        return PiecewiseLinearPath(times, tuple(tuple(row / h) for row in self.increments))


def sample_brownian_path(dim: int, horizon: float, level: int, seed: int,
                         index: int = 0) -> BrownianSample:
    """Linear interpolation of Brownian motion on 2**level steps of [0, horizon]."""
    _check(dim, horizon, level)
    inc = brownian_increments(dim, horizon, level, seed, index, index + 1)[0]
    return BrownianSample(dim, float(horizon), level, seed, index, inc)


def stratonovich_moment(word, t):
    """E of the Stratonovich iterated integral of ``word`` over [0, t]."""
    word = tuple(word)
    if not is_moment_word(word):
        return 0
    n, n0, _ = word_degree(word)
    p = (n + n0) // 2
    q = (n - n0) // 2
    if isinstance(t, (int, Fraction)):
        return Fraction(t) ** p / (2 ** q * math.factorial(p))
    return t ** p / (2 ** q * math.factorial(p))


def expected_signature_exact(dim: int, t, depth: int, grading="scaling") -> TensorSeries:
    """exp(t (X_0 + 1/2 sum_i X_i^2)) in the truncated algebra."""
    half = Fraction(1, 2) if isinstance(t, (int, Fraction)) else 0.5
    gen = {(0,): t}
    for i in range(1, dim + 1):
        gen[(i, i)] = t * half
    return ts_exp(TensorSeries(gen, dim, depth, grading))


@dataclass
class MomentEstimate:
    words: tuple
    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    dim: int
    depth: int

    def series(self) -> TensorSeries:
        coeffs = {(): 1.0}
        coeffs.update({w: float(m) for w, m in zip(self.words, self.mean)})
        return TensorSeries(coeffs, self.dim, self.depth)


def _moment_chunk(task, dim, horizon, level, seed, words):
    _, lo, hi = task
    inc = brownian_increments(dim, horizon, level, seed, lo, hi)
    h = np.full(inc.shape[:2] + (1,), horizon / inc.shape[1])
    return signature_words(np.concatenate([h, inc], axis=2), words)


def expected_signature_mc(dim: int, t: float, depth: int, samples: int, level: int = 10,
                          seed: int = 0, workers: int = 1) -> MomentEstimate:
    """Sample mean and standard error of path signatures over ``samples`` paths."""
    _check(dim, t, level)
    if samples < 1:
        raise ConfigurationError("need at least one sample")
    words = words_up_to(dim, depth)
    fn = partial(_moment_chunk, dim=dim, horizon=float(t), level=level, seed=seed, words=words)
    values = np.concatenate(run_chunks(fn, chunk_bounds(samples), workers), axis=0)
    mean = values.mean(axis=0)
    if samples > 1:
        stderr = values.std(axis=0, ddof=1) / math.sqrt(samples)
    else:
        stderr = np.full(len(words), np.nan)
    return MomentEstimate(words, mean, stderr, samples, dim, depth)


def moments_table(est: MomentEstimate, t) -> list[dict]:
    """Rows: word, estimate, std_error, exact, z_score."""
    rows = []
    for w, m, se in zip(est.words, est.mean, est.stderr):
        exact = float(stratonovich_moment(w, t))
        z = (m - exact) / se if se > 0 else (0.0 if m == exact else math.inf)
        rows.append({"word": word_str(w), "estimate": float(m), "std_error": float(se),
                     "exact": exact, "z_score": float(z)})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
