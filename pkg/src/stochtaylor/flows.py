"""Polynomial vector fields, their flows, the Castell scheme and a Heun reference.

Fields have rational polynomial components, so Lie brackets are exact. Flows
are numerical (adaptive Runge-Kutta via scipy). Every batched routine works on
fixed-size chunks of samples, so its output does not depend on worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, partial
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.integrate import solve_ivp

from .brownian import BrownianSample, standard_normals
from .errors import ConfigurationError, CostError, IntegrationError
from .parallel import chunk_bounds, run_chunks
from .signature import chen_strichartz_sampled
from .words import Word, words_up_to

__all__ = [
    "Polynomial", "PolynomialVectorField", "poly_lie_bracket", "DrivenSystem",
    "parse_system", "rotation_benchmark", "nested_field_bracket", "flow", "flow_batch",
    "castell_step", "castell_batch", "stratonovich_heun_reference", "heun_batch",
    "ExperimentConfig", "ExperimentResult", "strong_error_experiment", "weak_error_experiment",
    "fit_slope", "quartic_observable", "FlowTolerance", "CompiledField",
]

Exponent = tuple[int, ...]


class Polynomial:
    """Multivariate polynomial in x_1..x_n with exact coefficients."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: Mapping[Exponent, object], nvars: int):
        clean = {}
        for e, c in terms.items():
            e = tuple(int(k) for k in e)
            if len(e) != nvars or any(k < 0 for k in e):
                raise ConfigurationError(f"bad exponent {e} for {nvars} variables")
            if c != 0:
                clean[e] = Fraction(c) if isinstance(c, int) else c
        self.terms = clean
        self.nvars = nvars

    @classmethod
    def constant(cls, c, nvars):
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, j, nvars, coeff=1):
        """coeff * x_j, with j counted from 1."""
        e = [0] * nvars
        e[j - 1] = 1
        return cls({tuple(e): coeff}, nvars)

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def _same(self, other):
        if self.nvars != other.nvars:
            raise ConfigurationError("polynomials in different numbers of variables")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.nvars)
        self._same(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(out, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({e: c * other for e, c in self.terms.items()}, self.nvars)
        self._same(other)
        out: dict[Exponent, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(out, self.nvars)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def diff(self, j: int) -> "Polynomial":
        """Partial derivative in x_j (1-based)."""
        out = {}
        for e, c in self.terms.items():
            if e[j - 1]:
                f = list(e)
                f[j - 1] -= 1
                out[tuple(f)] = c * e[j - 1]
        return Polynomial(out, self.nvars)

    def __call__(self, x):
        """Evaluate at a point or on an array of points with trailing axis n."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for e, c in self.terms.items():
            out = out + float(c) * np.prod(x ** np.array(e), axis=-1)
        return out

    def evaluate_exact(self, point: Sequence):
        total = 0
        for e, c in self.terms.items():
            term = c
            for xi, k in zip(point, e):
                term = term * xi ** k
            total = total + term
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"x{j + 1}" + (f"**{k}" if k > 1 else "") for j, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


@dataclass(frozen=True)
class PolynomialVectorField:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigurationError("a vector field needs at least one component")
        n = len(comps)
        if any(p.nvars != n for p in comps):
            raise ConfigurationError("component count must equal the number of variables")
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    @classmethod
    def zero(cls, n):
        return cls(tuple(Polynomial({}, n) for _ in range(n)))

    @classmethod
    def constant(cls, vector):
        n = len(vector)
        return cls(tuple(Polynomial.constant(c, n) for c in vector))

    @classmethod
    def linear(cls, matrix):
        """x -> A x."""
        n = len(matrix)
        comps = []
        for row in matrix:
            p = Polynomial({}, n)
            for j, a in enumerate(row):
                p = p + Polynomial.variable(j + 1, n, a)
            comps.append(p)
        return cls(tuple(comps))

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def apply(self, f: Polynomial) -> Polynomial:
        """Derivation V f = sum_i v_i df/dx_i."""
        out = Polynomial({}, self.n)
        for i, v in enumerate(self.components):
            out = out + v * f.diff(i + 1)
        return out

    def __add__(self, other):
        self._same(other)
        return PolynomialVectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, scalar):
        return PolynomialVectorField(tuple(p * scalar for p in self.components))

    __rmul__ = __mul__

    def _same(self, other):
        if self.n != other.n:
            raise ConfigurationError(f"vector fields on R^{self.n} and R^{other.n}")

    def __call__(self, x):
        return np.stack([p(x) for p in self.components], axis=-1)

    def compile(self, monomials: Sequence[Exponent] | None = None) -> "CompiledField":
        if monomials is None:
            monomials = sorted({e for p in self.components for e in p.terms})
        return CompiledField.from_fields([self], monomials)


def poly_lie_bracket(v: PolynomialVectorField, w: PolynomialVectorField) -> PolynomialVectorField:
    """[V, W]_i = sum_j v_j dw_i/dx_j - w_j dv_i/dx_j."""
    v._same(w)
    return PolynomialVectorField(tuple(v.apply(wi) - w.apply(vi)
                                       for vi, wi in zip(v.components, w.components)))


@dataclass(frozen=True)
class CompiledField:
    """Fields sharing a monomial list: value = monomials(x) @ coeffs[k]."""
    exponents: np.ndarray    # (m, n)
    coeffs: np.ndarray       # (fields, m, n)

    @classmethod
    def from_fields(cls, fields: Sequence[PolynomialVectorField], monomials=None):
        n = fields[0].n
        if monomials is None:
            monomials = sorted({e for f in fields for p in f.components for e in p.terms})
        if not monomials:
            monomials = [(0,) * n]
        index = {e: r for r, e in enumerate(monomials)}
        C = np.zeros((len(fields), len(monomials), n))
        for k, f in enumerate(fields):
            for i, p in enumerate(f.components):
                for e, c in p.terms.items():
                    C[k, index[e], i] = float(c)
        return cls(np.array(monomials, dtype=int).reshape(len(monomials), n), C)

    def monomials(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1] + (len(self.exponents),))
        for j in range(self.exponents.shape[1]):
            col = self.exponents[:, j]
            if col.any():
                out = out * x[..., j:j + 1] ** col
        return out


# driven systems ----------------------------------------------------------

@dataclass(frozen=True)
class DrivenSystem:
    """dX = V_0(X) dt + sum_i V_i(X) o dB^i, X_0 = x0."""
    fields: tuple
    x0: tuple
    name: str = "system"

    def __post_init__(self):
        fields = tuple(self.fields)
        if len(fields) < 1:
            raise ConfigurationError("a driven system needs at least the drift field V_0")
        n = fields[0].n
        if any(f.n != n for f in fields):
            raise ConfigurationError("all fields of a driven system must share the dimension")
        if len(self.x0) != n:
            raise ConfigurationError(f"initial point has {len(self.x0)} coordinates, fields live on R^{n}")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "x0", tuple(self.x0))

    @property
    def n(self) -> int:
        return self.fields[0].n

    @property
    def d(self) -> int:
        return len(self.fields) - 1

    def commuting(self) -> bool:
        return all(poly_lie_bracket(a, b).is_zero()
                   for i, a in enumerate(self.fields) for b in self.fields[i + 1:])

    def to_text(self) -> str:
        lines = [f"n {self.n}", f"d {self.d}", "x0 " + " ".join(str(c) for c in self.x0)]
        for i, f in enumerate(self.fields):
            lines.append(f"V{i}: " + ", ".join(repr(p) for p in f.components))
        return "\n".join(lines) + "\n"


def rotation_benchmark(x0=(1, 0)) -> DrivenSystem:
    """V_0 = 0, V_1 = d/dx1, V_2 = -x2 d/dx1 + x1 d/dx2; [V_1, V_2] = d/dx2."""
    n = 2
    v1 = PolynomialVectorField.constant((1, 0))
    v2 = PolynomialVectorField.linear([[0, -1], [1, 0]])
    return DrivenSystem((PolynomialVectorField.zero(n), v1, v2), tuple(x0), name="rotation")


def parse_system(text: str) -> DrivenSystem:
    """Read a system file.

    Format (``#`` starts a comment)::

        n 2
        d 2
        x0 1 0
        V0: 0, 0
        V1: 1, 0
        V2: -x2, x1

    Components are polynomial expressions in x1..xn with rational coefficients;
    fields that are not listed are zero.
    """
    import sympy

    n = d = None
    x0 = None
    raw_fields: dict[int, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line:
            head, body = line.split(":", 1)
            head = head.strip()
            if not (head.startswith("V") and head[1:].isdigit()):
                raise ConfigurationError(f"line {lineno}: expected V<k>: ..., got {head!r}")
            raw_fields[int(head[1:])] = [s.strip() for s in body.split(",")]
            continue
        key, *vals = line.split()
        if key == "n":
            n = int(vals[0])
        elif key == "d":
            d = int(vals[0])
        elif key == "x0":
            x0 = tuple(Fraction(v) for v in vals)
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
    if n is None or d is None:
        raise ConfigurationError("system file must give n and d")
    if x0 is None:
        x0 = (Fraction(0),) * n
    if any(k > d for k in raw_fields):
        raise ConfigurationError(f"field index exceeds d = {d}")
    syms = sympy.symbols(" ".join(f"x{j}" for j in range(1, n + 1)), seq=True)
    local = {str(s): s for s in syms}
    fields = []
    for k in range(d + 1):
        exprs = raw_fields.get(k, ["0"] * n)
        if len(exprs) != n:
            raise ConfigurationError(f"V{k} has {len(exprs)} components, expected {n}")
        comps = []
        for src in exprs:
            try:
                expr = sympy.sympify(src, locals=local, rational=True)
                poly = sympy.Poly(expr, *syms)
            except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
                raise ConfigurationError(f"V{k}: cannot read {src!r} as a polynomial") from exc
            terms = {}
            for e, c in poly.terms():
                if not c.is_Rational:
                    raise ConfigurationError(f"V{k}: coefficient {c} is not rational")
                terms[e] = Fraction(int(c.p), int(c.q))
            comps.append(Polynomial(terms, n))
        fields.append(PolynomialVectorField(tuple(comps)))
    return DrivenSystem(tuple(fields), x0)


@lru_cache(maxsize=1024)
def _nested(system: DrivenSystem, word: Word) -> PolynomialVectorField:
    if len(word) == 1:
        return system.fields[word[0]]
    return poly_lie_bracket(system.fields[word[0]], _nested(system, word[1:]))


def nested_field_bracket(system: DrivenSystem, word: Sequence[int]) -> PolynomialVectorField:
    """V_I = [V_i1, [V_i2, ..., [V_i(k-1), V_ik]...]]."""
    word = tuple(int(i) for i in word)
    if not word:
        raise ConfigurationError("nested bracket needs a non-empty word")
    if len(word) > 6:
        raise CostError(f"bracket words longer than 6 are refused (got {len(word)})")
    if any(i < 0 or i > system.d for i in word):
        raise ConfigurationError(f"word {word} uses fields outside V_0..V_{system.d}")
    return _nested(system, word)


# flows -------------------------------------------------------------------

@dataclass(frozen=True)
class FlowTolerance:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_evals: int = 200_000
    method: str = "DOP853"


def _integrate(rhs, y0: np.ndarray, tau: float, tol: FlowTolerance) -> np.ndarray:
    evals = [0]

    def counted(_t, y):
        evals[0] += 1
        if evals[0] > tol.max_evals:
            raise IntegrationError(
                f"flow needed more than {tol.max_evals} field evaluations (possible blow-up)")
        out = rhs(y)
        if not np.all(np.isfinite(out)):
            raise IntegrationError("field evaluation overflowed (possible blow-up)")
        return out

    if tau == 0:
        return np.array(y0, dtype=float)
    sol = solve_ivp(counted, (0.0, tau), y0, method=tol.method, rtol=tol.rtol, atol=tol.atol)
    if not sol.success:
        raise IntegrationError(f"flow integration failed: {sol.message}")
    return sol.y[:, -1]


def flow(v: PolynomialVectorField, x0: Sequence[float], tau: float,
         tol: FlowTolerance | float | None = None) -> np.ndarray:
    """e^{tau V}(x0)."""
    tol = _tolerance(tol)
    cf = v.compile()
    rhs = lambda y: cf.monomials(y) @ cf.coeffs[0]
    return _integrate(rhs, np.asarray(x0, dtype=float), float(tau), tol)


def _tolerance(tol) -> FlowTolerance:
    if tol is None:
        return FlowTolerance()
    if isinstance(tol, FlowTolerance):
        return tol
    return FlowTolerance(rtol=float(tol), atol=float(tol) * 1e-2)


def flow_batch(compiled: CompiledField, weights: np.ndarray, x0: np.ndarray, tau: float = 1.0,
               tol: FlowTolerance | float | None = None) -> np.ndarray:
    """Flow each sample s along W_s = sum_k weights[s, k] * field_k for time tau.

    ``x0`` has shape (batch, n). The whole batch is one ODE system.
    """
    tol = _tolerance(tol)
    weights = np.asarray(weights, dtype=float)
    batch, n = x0.shape
    C = np.einsum("sk,kmn->smn", weights, compiled.coeffs)

    def rhs(y):
        x = y.reshape(batch, n)
        return np.einsum("sm,smn->sn", compiled.monomials(x), C).ravel()

    return _integrate(rhs, np.asarray(x0, dtype=float).ravel(), tau, tol).reshape(batch, n)


def castell_words(system: DrivenSystem, depth: int) -> list[Word]:
    return list(words_up_to(system.d, depth))


def castell_step(system: DrivenSystem, lam: Mapping[Word, float], depth: int,
                 tol: FlowTolerance | float | None = None) -> np.ndarray:
    """exp(sum_{d(I) <= depth} Lambda_I V_I)(x0)."""
    words = castell_words(system, depth)
    missing = [w for w in words if w not in lam]
    if missing:
        raise ConfigurationError(f"Lambda is missing words, e.g. {missing[0]}")
    w_field = PolynomialVectorField.zero(system.n)
    for w in words:
        if lam[w] != 0:
            w_field = w_field + nested_field_bracket(system, w) * lam[w]
    return flow(w_field, [float(c) for c in system.x0], 1.0, tol)


def castell_batch(system: DrivenSystem, lam: np.ndarray, words: Sequence[Word],
                  tol: FlowTolerance | float | None = None) -> np.ndarray:
    """Castell endpoints for a batch of Lambda rows (shape (batch, len(words)))."""
    fields = [nested_field_bracket(system, w) for w in words]
    keep = [k for k, f in enumerate(fields) if not f.is_zero()]
    x0 = np.tile(np.array([float(c) for c in system.x0]), (lam.shape[0], 1))
    if not keep:
        return x0
    compiled = CompiledField.from_fields([fields[k] for k in keep])
    return flow_batch(compiled, lam[:, keep], x0, 1.0, tol)


# reference solver --------------------------------------------------------

def heun_batch(system: DrivenSystem, increments: np.ndarray, substeps: int = 1) -> np.ndarray:
    """Stratonovich Heun scheme along piecewise-linear driving increments.

    ``increments`` has shape (batch, segments, d + 1), column 0 the time step.
    Each segment is split into ``substeps`` equal pieces.
    """
    inc = np.asarray(increments, dtype=float)
    batch, nseg, A = inc.shape
    if A != system.d + 1:
        raise ConfigurationError(f"increments carry {A - 1} noise letters, system has d = {system.d}")
    compiled = CompiledField.from_fields(list(system.fields))
    x = np.tile(np.array([float(c) for c in system.x0]), (batch, 1))
    inc = inc / substeps

    def drive(x, y):
        # sum_k V_k(x) y_k
        return np.einsum("sm,smn->sn", compiled.monomials(x), np.einsum("sk,kmn->smn", y, compiled.coeffs))

    for s in range(nseg):
        y = inc[:, s, :]
        for _ in range(substeps):
            k1 = drive(x, y)
            k2 = drive(x + k1, y)
            x = x + 0.5 * (k1 + k2)
    return x


def stratonovich_heun_reference(system: DrivenSystem, sample: BrownianSample, substeps: int = 1) -> np.ndarray:
    """Heun endpoint along one sampled Brownian path (steps aligned with its grid)."""
    if substeps < 1:
        raise ConfigurationError("substeps must be >= 1")
    if sample.dim != system.d:
        raise ConfigurationError(f"sample has dimension {sample.dim}, system has d = {system.d}")
    return heun_batch(system, sample.time_increments()[None], substeps)[0]


# experiments -------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    depth: int
    t_grid: tuple
    samples: int = 2000
    level: int = 6
    substeps: int = 4
    seed: int = 0
    rtol: float = 1e-10
    atol: float = 1e-12


@dataclass
class ExperimentResult:
    kind: str
    config: ExperimentConfig
    rows: list = field(default_factory=list)   # dicts: t, error, stderr
    slope: float = math.nan
    slope_ci: tuple = (math.nan, math.nan)
    intercept: float = math.nan


def fit_slope(ts: Sequence[float], errors: Sequence[float], level: float = 0.95):
    """Least-squares slope of log(error) on log(t) with a t-based confidence interval."""
    x = np.log(np.asarray(ts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return math.nan, (math.nan, math.nan), math.nan
    fit = stats.linregress(x, y)
    if len(x) > 2:
        q = stats.t.ppf(0.5 + level / 2, len(x) - 2)
        ci = (fit.slope - q * fit.stderr, fit.slope + q * fit.stderr)
    else:
        ci = (fit.slope, fit.slope)
    return float(fit.slope), (float(ci[0]), float(ci[1])), float(fit.intercept)


def _coupled_chunk(task, system, cfg: ExperimentConfig, t: float, stream: int):
    """Castell and reference endpoints for samples lo..hi at horizon t."""
    _, lo, hi = task
    steps = 2 ** cfg.level
    # common random numbers: the same normals are rescaled for every t
    z = standard_normals(cfg.seed, lo, hi, steps, system.d, stream)
    h = t / steps
    inc = np.concatenate([np.full(z.shape[:2] + (1,), h), z * math.sqrt(h)], axis=2)
    words, lam = chen_strichartz_sampled(inc, cfg.depth)
    tol = FlowTolerance(rtol=cfg.rtol, atol=cfg.atol)
    return castell_batch(system, lam, words, tol), heun_batch(system, inc, cfg.substeps)


def _coupled(system, cfg, t, workers, stream):
    fn = partial(_coupled_chunk, system=system, cfg=cfg, t=t, stream=stream)
    parts = run_chunks(fn, chunk_bounds(cfg.samples), workers)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def _check_experiment(system, depth, t_grid, samples, level):
    if depth not in (1, 2, 3):
        raise ConfigurationError("Castell experiments support depth N in {1, 2, 3}")
    if not t_grid or any(t <= 0 for t in t_grid):
        raise ConfigurationError("t grid must be non-empty and positive")
    if samples < 2:
        raise ConfigurationError("need at least two samples for a standard error")
    if not 0 <= level <= 16:
        raise ConfigurationError("level must be in [0, 16]")


def strong_error_experiment(system: DrivenSystem, depth: int, t_grid: Sequence[float],
                            samples: int = 2000, level: int = 6, seed: int = 0,
                            substeps: int = 4, workers: int = 1) -> ExperimentResult:
    """Mean |Castell - reference| per t over coupled samples, and the log-log slope."""
    _check_experiment(system, depth, t_grid, samples, level)
    cfg = ExperimentConfig(depth, tuple(float(t) for t in t_grid), samples, level, substeps, seed)
    res = ExperimentResult("strong", cfg)
    for t in cfg.t_grid:
        c, r = _coupled(system, cfg, t, workers, stream=1)
        err = np.linalg.norm(c - r, axis=1)
        res.rows.append({"t": t, "error": float(err.mean()),
                         "stderr": float(err.std(ddof=1) / math.sqrt(samples))})
    res.slope, res.slope_ci, res.intercept = fit_slope(cfg.t_grid, [r["error"] for r in res.rows])
    return res


def weak_error_experiment(system: DrivenSystem, observable: Polynomial, depth: int,
                          t_grid: Sequence[float], samples: int = 2000, level: int = 6,
                          seed: int = 0, substeps: int = 4, workers: int = 1) -> ExperimentResult:
    """|mean f(Castell) - mean f(reference)| per t, and the fitted weak order."""
    _check_experiment(system, depth, t_grid, samples, level)
    if observable.nvars != system.n:
        raise ConfigurationError("observable and system live in different dimensions")
    cfg = ExperimentConfig(depth, tuple(float(t) for t in t_grid), samples, level, substeps, seed)
    res = ExperimentResult("weak", cfg)
    for t in cfg.t_grid:
        c, r = _coupled(system, cfg, t, workers, stream=1)
        diff = observable(c) - observable(r)
        res.rows.append({"t": t, "error": float(abs(diff.mean())),
                         "stderr": float(diff.std(ddof=1) / math.sqrt(samples))})
    errs = [r["error"] for r in res.rows]
    if all(e > 0 for e in errs):
        res.slope, res.slope_ci, res.intercept = fit_slope(cfg.t_grid, errs)
    return res


def quartic_observable(n: int = 2) -> Polynomial:
    """x1^4 + x2^4 + x1 x2 (default observable for the weak-order study)."""
    p = Polynomial({}, n)
    for j in range(1, n + 1):
        e = [0] * n
        e[j - 1] = 4
        p = p + Polynomial({tuple(e): 1}, n)
    if n >= 2:
        e = [0] * n
        e[0] = e[1] = 1
        p = p + Polynomial({tuple(e): 1}, n)
    return p
