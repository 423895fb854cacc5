"""Fermion calculus on the exterior algebra, supertraces and the local Gauss-Bonnet identity.

Basis forms are subsets S of {1..d} stored as bitmasks (bit i-1 for index i);
the matrix row/column of S is the integer S itself. Creation a*_i wedges
theta_i on the left, with sign (-1)^{#{j in S : j < i}}; a_i is its transpose.

Curvature is stored in the index convention R_ijkl = <R(e_j, e_k) e_l, e_i>.
Relative to the usual tensor Rm(a, b, c, e) = <R(e_a, e_b) e_c, e_e> this is
R_ijkl = Rm(j, k, l, i).

Exact mode uses numpy object arrays of ints/Fractions; Euler-form values are
then returned as the rational coefficient of pi^{-d/2}.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, CostError, DomainError, ValidationError

__all__ = [
    "FermionOperator", "fermion_matrix", "aij_operator", "expand_in_AIJ", "expand_in_AIJ_dense",
    "reconstruct", "supertrace_direct", "supertrace_formula", "CurvatureTensor",
    "curvature_endomorphism", "euler_form", "euler_form_coefficient",
    "local_chern_identity_check", "gauss_bonnet_model", "GaussBonnetResult",
]

MAX_DIM = 6


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _subset(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def _zeros(n: int, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty((n, n), dtype=object)
        out.fill(0)
        return out
    return np.zeros((n, n))


@dataclass(frozen=True, eq=False)
class FermionOperator:
    """Operator on the 2^d-dimensional exterior algebra, as a dense matrix."""
    matrix: np.ndarray
    d: int

    def __post_init__(self):
        n = 1 << self.d
        if self.matrix.shape != (n, n):
            raise ConfigurationError(f"operator on d = {self.d} must be {n} x {n}, got {self.matrix.shape}")

    @property
    def exact(self) -> bool:
        return self.matrix.dtype == object

    def _other(self, other):
        if not isinstance(other, FermionOperator):
            return NotImplemented
        if other.d != self.d:
            raise ConfigurationError(f"operators on d = {self.d} and d = {other.d}")
        return other.matrix

    def __matmul__(self, other):
        m = self._other(other)
        return FermionOperator(self.matrix @ m, self.d)

    def __add__(self, other):
        return FermionOperator(self.matrix + self._other(other), self.d)

    def __sub__(self, other):
        return FermionOperator(self.matrix - self._other(other), self.d)

    def __mul__(self, scalar):
        return FermionOperator(self.matrix * scalar, self.d)

    __rmul__ = __mul__

    def __neg__(self):
        return FermionOperator(-self.matrix, self.d)

    def __pow__(self, k: int):
        out = FermionOperator.identity(self.d, self.exact)
        for _ in range(k):
            out = out @ self
        return out

    def __eq__(self, other):
        if not isinstance(other, FermionOperator):
            return NotImplemented
        return self.d == other.d and bool(np.all(self.matrix == other.matrix))

    __hash__ = None

    def anticommutator(self, other):
        return self @ other + other @ self

    def to_float(self):
        return FermionOperator(self.matrix.astype(float), self.d)

    @classmethod
    def identity(cls, d, exact=True):
        m = _zeros(1 << d, exact)
        for s in range(1 << d):
            m[s, s] = 1
        return cls(m, d)

    @classmethod
    def zero(cls, d, exact=True):
        return cls(_zeros(1 << d, exact), d)


def _check_dim(d):
    if d < 1:
        raise ConfigurationError("dimension must be >= 1")
    if d > MAX_DIM:
        raise CostError(f"exterior algebra of dimension 2^{d} is over the d <= {MAX_DIM} limit")


@lru_cache(maxsize=None)
def _creation_map(i: int, d: int):
    """(sources, targets, signs) of a*_i on basis bitmasks."""
    bit = 1 << (i - 1)
    src, dst, sgn = [], [], []
    for s in range(1 << d):
        if not s & bit:
            src.append(s)
            dst.append(s | bit)
            sgn.append(-1 if _popcount(s & (bit - 1)) % 2 else 1)
    return tuple(src), tuple(dst), tuple(sgn)


def fermion_matrix(kind: str, i: int, d: int, exact: bool = True) -> FermionOperator:
    """Matrix of a*_i (``kind='creation'``) or a_i (``kind='annihilation'``)."""
    _check_dim(d)
    if not 1 <= i <= d:
        raise ConfigurationError(f"fermion index {i} out of range 1..{d}")
    if kind not in ("creation", "annihilation"):
        raise ConfigurationError(f"kind must be 'creation' or 'annihilation', got {kind!r}")
    m = _zeros(1 << d, exact)
    for s, t, g in zip(*_creation_map(i, d)):
        if kind == "creation":
            m[t, s] = g
        else:
            m[s, t] = g
    return FermionOperator(m, d)


def _apply_aij(I, J, state: int):
    """A_IJ |state> as (sign, new state), or None when it vanishes."""
    sign = 1
    for j in reversed(J):
        bit = 1 << (j - 1)
        if not state & bit:
            return None
        if _popcount(state & (bit - 1)) % 2:
            sign = -sign
        state ^= bit
    for i in reversed(I):
        bit = 1 << (i - 1)
        if state & bit:
            return None
        if _popcount(state & (bit - 1)) % 2:
            sign = -sign
        state |= bit
    return sign, state


def aij_operator(I, J, d: int, exact: bool = True) -> FermionOperator:
    """A_IJ = a*_{i1} ... a*_{ik} a_{j1} ... a_{jl} for increasing I, J."""
    _check_dim(d)
    I, J = tuple(I), tuple(J)
    for w in (I, J):
        if list(w) != sorted(set(w)) or any(not 1 <= i <= d for i in w):
            raise ConfigurationError(f"{w} is not an increasing word in 1..{d}")
    m = _zeros(1 << d, exact)
    for s in range(1 << d):
        r = _apply_aij(I, J, s)
        if r is not None:
            m[r[1], s] = r[0]
    return FermionOperator(m, d)


def _aij_element(T: int, S: int, K: int) -> int:
    """<T| A_{T minus K, S minus K} |S>; K must be a subset of S and T."""
    r = _apply_aij(_subset(T & ~K), _subset(S & ~K), S)
    if r is None or r[1] != T:
        raise AssertionError("A_IJ basis element does not map S to T")
    return r[0]


def expand_in_AIJ(op: FermionOperator) -> dict[tuple, object]:
    """Coefficients c_IJ with op = sum c_IJ A_IJ (all stars to the left).

    A_{I'J'} sends S to T only when S minus J' = T minus I' =: K, so
    op[T, S] = sum over K within S and T of c_{T-K, S-K} <T|A_{T-K,S-K}|S>.
    The K = empty term involves c_{T,S}; all others have smaller index sets,
    so the system is solved by recursion on |T| + |S|.
    """
    d = op.d
    _check_dim(d)
    exact = op.exact
    m = op.matrix
    n = 1 << d
    coef: dict[tuple[int, int], object] = {}
    pairs = sorted(((t, s) for t in range(n) for s in range(n)),
                   key=lambda p: (_popcount(p[0]) + _popcount(p[1]), p))
    for t, s in pairs:
        common = t & s
        acc = m[t, s]
        k = common
        while k:
            c = coef.get((t & ~k, s & ~k), 0)
            if c != 0:
                acc = acc - c * _aij_element(t, s, k)
            k = (k - 1) & common
        val = acc * _aij_element(t, s, 0)      # sign is +-1, its own inverse
        if val != 0:
            coef[(t, s)] = val
    out = {(_subset(t), _subset(s)): (Fraction(c) if exact and isinstance(c, int) else c)
           for (t, s), c in coef.items()}
    return dict(sorted(out.items(), key=lambda kv: (len(kv[0][0]) + len(kv[0][1]), kv[0])))


def expand_in_AIJ_dense(op: FermionOperator) -> dict[tuple, float]:
    """Same expansion by solving the dense 4^d x 4^d linear system (floats, d <= 5)."""
    d = op.d
    if d > 5:
        raise CostError("dense A_IJ solve is limited to d <= 5")
    n = 1 << d
    labels = [(_subset(t), _subset(s)) for t in range(n) for s in range(n)]
    basis = np.stack([aij_operator(I, J, d, exact=False).matrix.ravel() for I, J in labels], axis=1)
    c = np.linalg.solve(basis, op.matrix.astype(float).ravel())
    return {lab: float(v) for lab, v in zip(labels, c) if abs(v) > 1e-13}


def reconstruct(coeffs: dict, d: int, exact: bool = True) -> FermionOperator:
    out = FermionOperator.zero(d, exact)
    for (I, J), c in coeffs.items():
        out = out + aij_operator(I, J, d, exact) * c
    return out


def supertrace_direct(op: FermionOperator):
    """Trace on even forms minus trace on odd forms."""
    total = 0
    for s in range(1 << op.d):
        v = op.matrix[s, s]
        total = total - v if _popcount(s) % 2 else total + v
    return total


def supertrace_formula(op: FermionOperator):
    """(-1)^{d(d-1)/2} times the coefficient of A_{1..d, 1..d}."""
    d = op.d
    if d % 2:
        raise DomainError("the top-coefficient supertrace formula needs even d")
    full = tuple(range(1, d + 1))
    c = expand_in_AIJ(op).get((full, full), 0)
    return c if (d * (d - 1) // 2) % 2 == 0 else -c


# curvature ---------------------------------------------------------------

def _as_scalar_array(a, exact: bool) -> np.ndarray:
    arr = np.array(a, dtype=object if exact else float)
    if exact:
        arr = np.vectorize(lambda x: x if isinstance(x, Fraction) else Fraction(x), otypes=[object])(arr)
    return arr


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """R[i-1, j-1, k-1, l-1] = R_ijkl = <R(e_j, e_k) e_l, e_i>.

    Validated symmetries: R_ijkl = -R_ikjl, R_ijkl = -R_ljki, R_ijkl = R_klij
    and R_ijkl + R_iklj + R_iljk = 0.
    """
    R: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        R = self.R
        if R.ndim != 4 or len(set(R.shape)) != 1:
            raise ConfigurationError(f"curvature must be d x d x d x d, got shape {R.shape}")
        problem = self.symmetry_violation()
        if problem:
            raise ValidationError(problem)

    @property
    def d(self) -> int:
        return self.R.shape[0]

    @property
    def exact(self) -> bool:
        return self.R.dtype == object

    def _bad(self, diff) -> float:
        if self.exact:
            return float(max((abs(x) for x in diff.ravel()), default=0))
        return float(np.max(np.abs(diff), initial=0.0))

    def symmetry_violation(self) -> str | None:
        R = self.R
        tol = 0.0 if self.exact else self.tol
        checks = [
            ("antisymmetry in (j, k): R_ijkl = -R_ikjl", R + R.transpose(0, 2, 1, 3)),
            ("antisymmetry in (i, l): R_ijkl = -R_ljki", R + R.transpose(3, 1, 2, 0)),
            ("pair symmetry: R_ijkl = R_klij", R - R.transpose(2, 3, 0, 1)),
            ("first Bianchi: R_ijkl + R_iklj + R_iljk = 0",
             R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)),
        ]
        for label, diff in checks:
            bad = self._bad(diff)
            if bad > tol:
                return f"curvature violates {label} (max residual {bad:.3g})"
        return None

    def standard(self) -> np.ndarray:
        """Rm[a, b, c, e] = <R(e_a, e_b) e_c, e_e> = R_{e a b c}."""
        return self.R.transpose(1, 2, 3, 0)

    @classmethod
    def from_standard(cls, rm, exact: bool | None = None) -> "CurvatureTensor":
        rm = np.asarray(rm)
        exact = rm.dtype == object if exact is None else exact
        return cls(_as_scalar_array(rm.transpose(3, 0, 1, 2), exact))

    @classmethod
    def constant_curvature(cls, d: int, K=1, exact: bool = True) -> "CurvatureTensor":
        """Space form: R(X, Y)Z = K(<Y, Z>X - <X, Z>Y), so R_ijkl = K(d_kl d_ji - d_jl d_ki)."""
        R = np.empty((d,) * 4, dtype=object if exact else float)
        for i, j, k, l in itertools.product(range(d), repeat=4):
            R[i, j, k, l] = K * ((k == l) * (j == i) - (j == l) * (k == i))
        return cls(_as_scalar_array(R, exact))

    @classmethod
    def zero(cls, d: int, exact: bool = True) -> "CurvatureTensor":
        return cls(_as_scalar_array(np.zeros((d,) * 4, dtype=int), exact))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, exact: bool = True, terms: int = 3,
               bound: int = 3) -> "CurvatureTensor":
        """Sum of Kulkarni-Nomizu products of random integer symmetric matrices.

        Such sums span the algebraic curvature tensors, so this samples the
        full symmetry class. Exact mode adds random rational weights.
        """
        rm = np.zeros((d,) * 4, dtype=object if exact else float)
        for _ in range(terms):
            h = rng.integers(-bound, bound + 1, (d, d))
            k = rng.integers(-bound, bound + 1, (d, d))
            h, k = h + h.T, k + k.T
            w = Fraction(int(rng.integers(1, 7)), int(rng.integers(1, 7))) if exact else rng.uniform(-1, 1)
            kn = (np.einsum("ac,bd->abcd", h, k) + np.einsum("bd,ac->abcd", h, k)
                  - np.einsum("ad,bc->abcd", h, k) - np.einsum("bc,ad->abcd", h, k))
            if exact:
                rm = rm + kn.astype(object) * w
            else:
                rm = rm + kn * w
        # kn satisfies the symmetries of <R(e_a, e_b) e_c, e_e> up to an overall sign
        return cls.from_standard(rm, exact)

    def __add__(self, other):
        return CurvatureTensor(self.R + other.R)

    def to_text(self) -> str:
        lines = [f"d {self.d}"]
        for idx in itertools.product(range(self.d), repeat=4):
            v = self.R[idx]
            if v != 0:
                val = str(v) if self.exact else repr(float(v))
                lines.append(" ".join(str(i + 1) for i in idx) + " " + val)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, exact: bool = True) -> "CurvatureTensor":
        """File of ``d <n>`` then ``i j k l value`` lines (1-based, nonzero entries)."""
        d = None
        entries = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "d":
                d = int(parts[1])
            elif len(parts) == 5:
                idx = tuple(int(p) for p in parts[:4])
                val = Fraction(parts[4]) if exact else float(Fraction(parts[4]))
                entries.append((idx, val))
            else:
                raise ConfigurationError(f"line {lineno}: expected 'i j k l value'")
        if d is None:
            raise ConfigurationError("curvature file must start with 'd <n>'")
        R = np.empty((d,) * 4, dtype=object if exact else float)
        R.fill(Fraction(0) if exact else 0.0)
        for idx, val in entries:
            if not all(1 <= i <= d for i in idx):
                raise ConfigurationError(f"index {idx} out of range 1..{d}")
            R[tuple(i - 1 for i in idx)] = val
        return cls(R)


@lru_cache(maxsize=None)
def _hop_map(i: int, j: int, d: int):
    """a*_i a_j on basis bitmasks as (sources, targets, signs) arrays."""
    src, dst, sgn = [], [], []
    for s in range(1 << d):
        r = _apply_aij((i,), (j,), s)
        if r is not None:
            src.append(s)
            dst.append(r[1])
            sgn.append(r[0])
    return np.array(src, dtype=int), np.array(dst, dtype=int), np.array(sgn, dtype=int)


def _hop_apply(i, j, d, mat: np.ndarray) -> np.ndarray:
    """(a*_i a_j) @ mat via the sparse hop map."""
    src, dst, sgn = _hop_map(i, j, d)
    out = np.zeros_like(mat) if mat.dtype != object else _zeros(1 << d, True)
    if len(src):
        out[dst, :] = mat[src, :] * sgn[:, None]
    return out


def curvature_endomorphism(R: CurvatureTensor) -> FermionOperator:
    """F = -sum_{ijkl} R_ijkl a*_i a_j a*_k a_l."""
    d = R.d
    _check_dim(d)
    exact = R.exact
    n = 1 << d
    hops = {}
    for k in range(1, d + 1):
        for l in range(1, d + 1):
            hops[k, l] = _hop_apply(k, l, d, FermionOperator.identity(d, exact).matrix)
    total = _zeros(n, exact)
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            q = _zeros(n, exact)
            for k in range(1, d + 1):
                for l in range(1, d + 1):
                    r = R.R[i - 1, j - 1, k - 1, l - 1]
                    if r != 0:
                        q = q + hops[k, l] * r
            total = total - _hop_apply(i, j, d, q)
    return FermionOperator(total, d)


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for a in range(len(p)):
        while p[a] != a:
            b = p[a]
            p[a], p[b] = p[b], p[a]
            sign = -sign
    return sign


def _pfaffian_double_sum(rm: np.ndarray):
    """sum_{sigma,tau} eps(sigma) eps(tau) prod_m Rm[s(2m-1), s(2m), t(2m-1), t(2m)]."""
    d = rm.shape[0]
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(d))]
    total = 0
    half = d // 2
    for s, es in perms:
        # slice out the rows this sigma touches, then sum over tau
        blocks = [rm[s[2 * m], s[2 * m + 1]] for m in range(half)]
        inner = 0
        for t, et in perms:
            term = et
            for m in range(half):
                term = term * blocks[m][t[2 * m], t[2 * m + 1]]
                if term == 0:
                    break
            inner = inner + term
        total = total + es * inner
    return total


def euler_form_coefficient(R: CurvatureTensor):
    """c with euler_form(R) = c * pi^{-d/2}.

    c = (-1)^{d/2} / (8^{d/2} (d/2)!) * sum_{sigma,tau} eps eps prod_m Rm(pairs),
    the product running over the d/2 disjoint slot pairs (1,2), (3,4), ...
    """
    d = R.d
    if d % 2:
        raise DomainError("the Euler form is defined for even d")
    if d > MAX_DIM:
        raise CostError(f"permutation double sum over S_{d} is over the d <= {MAX_DIM} limit")
    half = d // 2
    s = _pfaffian_double_sum(R.standard())
    if R.exact:
        return Fraction((-1) ** half, 8 ** half * math.factorial(half)) * s
    return (-1) ** half * s / (8 ** half * math.factorial(half))


def euler_form(R: CurvatureTensor) -> float:
    """Pointwise Euler form omega(x) in an orthonormal frame."""
    return float(euler_form_coefficient(R)) / math.pi ** (R.d / 2)


@dataclass(frozen=True)
class IdentityCheck:
    lhs: object                # coefficient of pi^{-d/2} (exact) or value
    rhs: object
    residual: object

    def as_floats(self, d: int):
        scale = math.pi ** (d / 2)
        return float(self.lhs) / scale, float(self.rhs) / scale, abs(float(self.residual)) / scale


def normalized_supertrace_coefficient(R: CurvatureTensor):
    """(-1)^{d/2} / ((d/2)! 4^{d/2}) Str F^{d/2}: the coefficient of pi^{-d/2}."""
    d = R.d
    if d % 2:
        raise DomainError("the local identity needs even d")
    half = d // 2
    st = supertrace_direct(curvature_endomorphism(R) ** half)
    if R.exact:
        return Fraction((-1) ** half, math.factorial(half) * 4 ** half) * st
    return (-1) ** half * st / (math.factorial(half) * 4 ** half)


def local_chern_identity_check(R: CurvatureTensor) -> IdentityCheck:
    """Normalized Str F^{d/2} against the Euler form, both as coefficients of pi^{-d/2}."""
    lhs = normalized_supertrace_coefficient(R)
    rhs = euler_form_coefficient(R)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


# model spaces ------------------------------------------------------------

CONVENTION = ("R_ijkl = <R(e_j,e_k)e_l, e_i>; constant curvature K has "
              "R_ijkl = K(delta_kl delta_ji - delta_jl delta_ki), K = 1/r^2 > 0 on spheres")


@dataclass
class GaussBonnetResult:
    model: str
    d: int
    radius: float
    omega: float
    volume: float
    volume_quadrature: float
    chi: float
    chi_quadrature: float
    supertrace_side: float
    discrepancy: float
    convention: str = CONVENTION

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _sphere_volume(d: int, r: float) -> float:
    return 2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2) * r ** d


def _sphere_volume_quadrature(d: int, r: float) -> float:
    # hyperspherical angles: 2 pi * prod_{k=1}^{d-1} int_0^pi sin^k
    vol = 2 * math.pi
    for k in range(1, d):
        vol *= integrate.quad(lambda x, k=k: math.sin(x) ** k, 0.0, math.pi, epsabs=1e-13, epsrel=1e-12)[0]
    return vol * r ** d


MODELS = ("sphere_d2", "sphere_d4", "flat_torus_d2")


def gauss_bonnet_model(space: str, radius: float = 1.0) -> GaussBonnetResult:
    """chi = omega * volume for a constant-curvature model space."""
    key = space.replace("-", "_")
    if key not in MODELS:
        raise ConfigurationError(f"unknown model {space!r}; choose from {', '.join(MODELS)}")
    if not radius > 0:
        raise ConfigurationError("radius must be positive")
    if key == "flat_torus_d2":
        d = 2
        R = CurvatureTensor.zero(d)
        vol = (2 * math.pi * radius) ** 2
        vol_q = integrate.dblquad(lambda y, x: 1.0, 0, 2 * math.pi * radius, 0, 2 * math.pi * radius)[0]
    else:
        d = 2 if key == "sphere_d2" else 4
        K = Fraction(1) / Fraction(radius) ** 2
        R = CurvatureTensor.constant_curvature(d, K)
        vol = _sphere_volume(d, radius)
        vol_q = _sphere_volume_quadrature(d, radius)
    check = local_chern_identity_check(R)
    omega = float(check.rhs) / math.pi ** (d / 2)
    lhs = float(check.lhs) / math.pi ** (d / 2)
    return GaussBonnetResult(key, d, float(radius), omega, vol, vol_q, omega * vol, omega * vol_q,
                             lhs, abs(float(check.residual)) / math.pi ** (d / 2))
