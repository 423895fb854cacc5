"""Small-time diagonal heat kernel: a_0, the tangent variable and the a_1 slope.

Reduced density of the tangent variable. For U ~ N(0, I_d) put
tA(u) = (sqrt(t)/2) sum_k u_k omega^k and M(u) = tA cot(tA). Integrating the
Gaussian y-variable out of the Fourier double integral leaves

    (2 pi t)^{d/2} q_t(0) = E[ det(tA / sin tA)^{1/2} det(M)^{-1/2}
                               exp(-1/2 u^T (M^{-1} - I) u) ].

For real skew A the eigenvalues of (tA)^2 are -s^2 <= 0, so
z/sin z -> s/sinh s and z cot z -> s coth s >= 1: the integrand is smooth,
bounded and decays, and tensor Gauss-Hermite quadrature converges fast.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np

from .brownian import brownian_increments
from .errors import ConfigurationError, DomainError, QuadratureError, ValidationError
from .flows import DrivenSystem, heun_batch
from .parallel import chunk_bounds, run_chunks

__all__ = [
    "StructureConstants", "a0_coefficient", "KDEResult", "silverman_bandwidth",
    "kde_density_at", "levy_area_cf", "levy_area_cf_mc", "sample_tangent_variable",
    "sample_tangent_variables", "QuadratureResult", "tangent_density_quadrature",
    "A1Result", "a1_expansion_check", "heat_density_mc",
]


# structure constants -----------------------------------------------------

@dataclass(frozen=True)
class StructureConstants:
    """omega[i, j, k] = omega_ij^k, skew in (i, j) and in (j, k)."""
    omega: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        if w.ndim != 3 or len(set(w.shape)) != 1:
            raise ConfigurationError(f"structure constants must be d x d x d, got shape {w.shape}")
        bad_ij = np.max(np.abs(w + w.transpose(1, 0, 2)), initial=0.0)
        if bad_ij > 1e-12:
            raise ValidationError(f"omega_ij^k != -omega_ji^k (max violation {bad_ij:.3g})")
        bad_jk = np.max(np.abs(w + w.transpose(0, 2, 1)), initial=0.0)
        if bad_jk > 1e-12:
            raise ValidationError(f"omega_ij^k != -omega_ik^j (max violation {bad_jk:.3g})")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)

    @property
    def d(self) -> int:
        return self.omega.shape[0]

    @property
    def sum_sq(self) -> float:
        return float(np.sum(self.omega ** 2))

    @property
    def expected_slope(self) -> float:
        """-(1/16) sum (omega_ij^k)^2."""
        return -self.sum_sq / 16.0

    def scaled(self, c: float) -> "StructureConstants":
        return StructureConstants(c * self.omega, f"{c}*{self.name}")

    def matrix(self, lam: np.ndarray) -> np.ndarray:
        """A_ij = 1/2 sum_k lam_k omega_ij^k, batched over leading axes of lam."""
        return 0.5 * np.einsum("...k,ijk->...ij", lam, self.omega)

    @classmethod
    def zero(cls, d: int):
        return cls(np.zeros((d, d, d)), "zero")

    @classmethod
    def su2_epsilon(cls):
        eps = np.zeros((3, 3, 3))
        for p in itertools.permutations(range(3)):
            inversions = sum(p[a] > p[b] for a in range(3) for b in range(a + 1, 3))
            eps[p] = (-1) ** inversions
        return cls(eps, "su2-epsilon")

    @classmethod
    def from_text(cls, text: str):
        """Lines ``d <n>`` then ``i j k value`` (1-based); unlisted entries are 0."""
        d = None
        entries = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "d":
                d = int(parts[1])
            elif len(parts) == 4:
                entries.append((int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ConfigurationError(f"line {lineno}: expected 'i j k value'")
        if d is None:
            raise ConfigurationError("structure-constant file must start with 'd <n>'")
        w = np.zeros((d, d, d))
        for i, j, k, v in entries:
            if not all(1 <= a <= d for a in (i, j, k)):
                raise ConfigurationError(f"index ({i},{j},{k}) out of range 1..{d}")
            w[i - 1, j - 1, k - 1] = v
        return cls(w, "file")

    @classmethod
    def preset(cls, name: str, d: int = 3):
        if name == "zero":
            return cls.zero(d)
        if name == "su2-epsilon":
            return cls.su2_epsilon()
        raise ConfigurationError(f"unknown structure-constant preset {name!r}")


# a_0 and kernel density estimation ---------------------------------------

def a0_coefficient(system: DrivenSystem, x0: Sequence[float] | None = None) -> float:
    """1 / ((2 pi)^{d/2} |det(V_1(x0), ..., V_d(x0))|)."""
    x0 = system.x0 if x0 is None else x0
    if system.d != system.n:
        raise DomainError(f"ellipticity needs d = n (got d = {system.d}, n = {system.n})")
    frame = np.stack([f(np.asarray(x0, dtype=float)) for f in system.fields[1:]], axis=1)
    det = np.linalg.det(frame)
    if abs(det) < 1e-14 * max(1.0, np.abs(frame).max()) ** system.d:
        raise DomainError("V_1..V_d are linearly dependent at x0 (not elliptic)")
    return 1.0 / ((2 * math.pi) ** (system.d / 2) * abs(det))


@dataclass(frozen=True)
class KDEResult:
    value: float
    stderr: float
    bandwidth: tuple
    samples: int
    half_bandwidth_value: float    # same estimate at half the bandwidth, a bias check


def silverman_bandwidth(samples: np.ndarray, factor: float = 0.5) -> np.ndarray:
    """Per-coordinate Silverman rule sigma_j (4 / ((d + 2) M))^{1/(d+4)}, times ``factor``."""
    m, d = samples.shape
    sigma = samples.std(axis=0, ddof=1)
    return factor * sigma * (4.0 / ((d + 2) * m)) ** (1.0 / (d + 4))


def kde_density_at(samples, point, bandwidth=None, factor: float = 0.5) -> KDEResult:
    """Gaussian product-kernel density estimate at one point, with its standard error."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, d = x.shape
    if m < 1000:
        raise ConfigurationError(f"kernel density estimation needs >= 1000 samples, got {m}")
    if bandwidth is None:
        h = silverman_bandwidth(x, factor)
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,)).copy()
    if np.any(h <= 0):
        raise ConfigurationError("bandwidth must be positive")
    p = np.broadcast_to(np.asarray(point, dtype=float), (d,))
    r2 = np.sum(((x - p) / h) ** 2, axis=1)
    k = np.exp(-0.5 * r2) / ((2 * math.pi) ** (d / 2) * np.prod(h))
    k_half = np.exp(-2.0 * r2) * 2.0 ** d / ((2 * math.pi) ** (d / 2) * np.prod(h))
    return KDEResult(float(k.mean()), float(k.std(ddof=1) / math.sqrt(m)), tuple(map(float, h)), m,
                     float(k_half.mean()))


# Levy area characteristic function ---------------------------------------

def _s_over_sinh(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(s < 1e-8, 1.0 - s * s / 6.0, s / np.sinh(s))
    return out


def _s_coth(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s < 1e-8, 1.0 + s * s / 3.0, s / np.tanh(s))
    return out


def _skew_spectrum(tA: np.ndarray):
    """(s, V): -(tA)^2 = V diag(s^2) V^T for real skew tA (batched)."""
    b = -np.matmul(tA, tA)
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    ev, vecs = np.linalg.eigh(b)
    return np.sqrt(np.clip(ev, 0.0, None)), vecs


def levy_area_cf(A, t: float, z) -> complex:
    """E[exp(i int_0^t (A B_s, dB_s)) | B_t = z] for real skew-symmetric A.

    det(tA / sin tA)^{1/2} exp(((I - tA cot tA) / (2t)) z . z), evaluated through
    the even functions x/sin x and x cot x of the matrix tA.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError("A must be a square matrix")
    if np.max(np.abs(A + A.T), initial=0.0) > 1e-12:
        raise ConfigurationError("A must be skew-symmetric")
    if not t > 0:
        raise ConfigurationError("t must be positive")
    z = np.asarray(z, dtype=float)
    if z.shape != (A.shape[0],):
        raise ConfigurationError(f"z must have length {A.shape[0]}")
    rho = np.max(np.abs(np.linalg.eigvals(A)), initial=0.0)
    if t * rho >= math.pi:
        raise DomainError(f"t * spectral radius = {t * rho:.6g} >= pi (principal branch guard)")
    if not np.any(A):
        return complex(1.0)
    s, vecs = _skew_spectrum(t * A)
    det_half = float(np.prod(np.sqrt(_s_over_sinh(s))))
    zc = vecs.T @ z
    quad = float(np.sum((1.0 - _s_coth(s)) * zc ** 2)) / (2 * t)
    return complex(det_half * math.exp(quad))


def _levy_chunk(task, A, t, z, radius, level, seed, stream):
    _, lo, hi = task
    d = A.shape[0]
    inc = brownian_increments(d, t, level, seed, lo, hi, stream)
    end = inc.sum(axis=1)
    prev = np.cumsum(inc, axis=1) - inc
    # Stratonovich int (A B, dB) along a piecewise-linear path: the midpoint
    # correction 1/2 sum A_ij dB^i dB^j vanishes for skew A
    phase = np.einsum("smi,ij,smj->s", prev, A.T, inc)
    inside = np.sum((end - z) ** 2, axis=1) <= radius ** 2
    return np.cos(phase[inside]), np.sin(phase[inside])


@dataclass(frozen=True)
class LevyMCResult:
    real: float
    imag: float
    stderr: float
    accepted: int


def levy_area_cf_mc(A, t: float, z, radius: float, samples: int, level: int = 8,
                    seed: int = 0, workers: int = 1) -> LevyMCResult:
    """Mean of exp(i int (A B, dB)) over paths whose endpoint lands within ``radius`` of z."""
    A = np.asarray(A, dtype=float)
    fn = partial(_levy_chunk, A=A, t=float(t), z=np.asarray(z, dtype=float), radius=radius,
                 level=level, seed=seed, stream=3)
    parts = run_chunks(fn, chunk_bounds(samples), workers)
    c = np.concatenate([p[0] for p in parts])
    s = np.concatenate([p[1] for p in parts])
    if len(c) < 2:
        raise ConfigurationError("too few paths ended in the conditioning ball")
    se = math.sqrt(max(c.var(ddof=1), s.var(ddof=1)) / len(c))
    return LevyMCResult(float(c.mean()), float(s.mean()), se, len(c))


# tangent variable --------------------------------------------------------

def _tangent_from_increments(omega: StructureConstants, inc: np.ndarray) -> np.ndarray:
    end = inc.sum(axis=1)
    prev = np.cumsum(inc, axis=1) - inc
    theta = end.copy()
    for i, j in zip(*np.triu_indices(omega.d, 1)):
        w = omega.omega[i, j]
        if not np.any(w):
            continue
        # int B^i dB^j - B^j dB^i along the piecewise-linear path
        area = np.einsum("sm,sm->s", prev[:, :, i], inc[:, :, j]) - np.einsum("sm,sm->s", prev[:, :, j], inc[:, :, i])
        theta += 0.5 * area[:, None] * w[None, :]
    return theta


def sample_tangent_variable(omega: StructureConstants, t: float, level: int, seed: int,
                            index: int = 0) -> np.ndarray:
    """One realization of theta_t^k = B^k_t + 1/2 sum_{i<j} omega_ij^k (Levy area)_ij."""
    if not 1 <= level <= 24:
        raise ConfigurationError("refinement level must be in [1, 24]")
    inc = brownian_increments(omega.d, t, level, seed, index, index + 1)
    return _tangent_from_increments(omega, inc)[0]


def _tangent_chunk(task, omega, t, level, seed):
    _, lo, hi = task
    return _tangent_from_increments(omega, brownian_increments(omega.d, t, level, seed, lo, hi))


def sample_tangent_variables(omega: StructureConstants, t: float, samples: int, level: int = 6,
                             seed: int = 0, workers: int = 1) -> np.ndarray:
    """``samples`` realizations of theta_t, shape (samples, d); row i matches index=i."""
    fn = partial(_tangent_chunk, omega=omega, t=float(t), level=level, seed=seed)
    return np.concatenate(run_chunks(fn, chunk_bounds(samples), workers), axis=0)


# quadrature --------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    t: float
    value: float          # q_t(0)
    normalized: float     # (2 pi t)^{d/2} q_t(0)
    order: int            # Gauss-Hermite points per axis at convergence
    rel_change: float


def _reduced_integrand(omega: StructureConstants, t: float, u: np.ndarray) -> np.ndarray:
    tA = math.sqrt(t) * omega.matrix(u)
    s, vecs = _skew_spectrum(tA)
    mu = _s_coth(s)                           # eigenvalues of tA cot tA
    if np.any(~np.isfinite(mu)) or np.any(mu <= 0):
        raise QuadratureError("reduced quadratic form lost positivity")
    det_part = np.prod(np.sqrt(_s_over_sinh(s) / mu), axis=-1)
    uc = np.einsum("pji,pj->pi", vecs, u)
    expo = -0.5 * np.sum((1.0 / mu - 1.0) * uc ** 2, axis=-1)
    return det_part * np.exp(expo)


def _tensor_gauss_hermite(fn, d: int, order: int, block: int = 1 << 16) -> float:
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / math.sqrt(2 * math.pi)
    total = 0.0
    # iterate over the first axis in blocks so memory stays bounded
    grids = np.meshgrid(*([x] * d), indexing="ij")
    weights = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in weights], axis=1), axis=1)
    for lo in range(0, len(pts), block):
        total += float(np.dot(wts[lo:lo + block], fn(pts[lo:lo + block])))
    return total


def tangent_density_quadrature(omega: StructureConstants, t: float, tol: float = 1e-10,
                               start_order: int = 8, max_order: int = 128) -> QuadratureResult:
    """q_t(0) for the tangent variable by tensor Gauss-Hermite with order doubling."""
    if not t > 0:
        raise ConfigurationError("t must be positive")
    d = omega.d
    norm = (2 * math.pi * t) ** (d / 2)
    if not np.any(omega.omega):
        return QuadratureResult(t, 1.0 / norm, 1.0, 1, 0.0)
    fn = partial(_reduced_integrand, omega, t)
    order = start_order
    prev = _tensor_gauss_hermite(fn, d, order)
    history = [(order, prev)]
    while order < max_order:
        order *= 2
        cur = _tensor_gauss_hermite(fn, d, order)
        history.append((order, cur))
        change = abs(cur - prev) / abs(cur)
        if change < tol:
            return QuadratureResult(t, cur / norm, cur, order, change)
        prev = cur
    raise QuadratureError(
        f"Gauss-Hermite did not converge to {tol:g} by order {max_order}; "
        f"history (order, value): {history}")


@dataclass(frozen=True)
class A1Result:
    t_grid: tuple
    normalized: tuple
    slope: float
    intercept: float
    expected_slope: float

    @property
    def rel_deviation(self) -> float:
        if self.expected_slope == 0:
            return abs(self.slope)
        return abs(self.slope - self.expected_slope) / abs(self.expected_slope)


def a1_expansion_check(omega: StructureConstants, t_grid: Sequence[float], tol: float = 1e-10) -> A1Result:
    """Least-squares slope of (2 pi t)^{d/2} q_t(0) against t."""
    ts = tuple(float(t) for t in t_grid)
    if len(ts) < 2:
        raise ConfigurationError("need at least two t values")
    vals = tuple(tangent_density_quadrature(omega, t, tol).normalized for t in ts)
    slope, intercept = np.polyfit(ts, vals, 1)
    return A1Result(ts, vals, float(slope), float(intercept), omega.expected_slope)


# heat kernel by simulation -----------------------------------------------

@dataclass(frozen=True)
class HeatEstimate:
    t: float
    density: KDEResult
    normalized: float          # t^{d/2} p_t(x0, x0)
    normalized_stderr: float


def _endpoint_chunk(task, system, x0, t, level, seed, substeps):
    _, lo, hi = task
    inc = brownian_increments(system.d, t, level, seed, lo, hi)
    h = np.full(inc.shape[:2] + (1,), t / inc.shape[1])
    moved = DrivenSystem(system.fields, tuple(x0), system.name)
    return heun_batch(moved, np.concatenate([h, inc], axis=2), substeps)


def heat_density_mc(system: DrivenSystem, x0: Sequence[float] | None, t: float, samples: int,
                    level: int = 1, seed: int = 0, bandwidth=None, factor: float = 0.5,
                    substeps: int = 1, workers: int = 1) -> HeatEstimate:
    """KDE at x0 of the law of X_t started at x0, from reference-solver endpoints."""
    x0 = system.x0 if x0 is None else tuple(x0)
    a0_coefficient(system, x0)    # raises unless elliptic at x0
    fn = partial(_endpoint_chunk, system=system, x0=x0, t=float(t), level=level,
                 seed=seed, substeps=substeps)
    ends = np.concatenate(run_chunks(fn, chunk_bounds(samples), workers), axis=0)
    kde = kde_density_at(ends, np.asarray(x0, dtype=float), bandwidth, factor)
    scale = t ** (system.d / 2)
    return HeatEstimate(float(t), kde, kde.value * scale, kde.stderr * scale)
