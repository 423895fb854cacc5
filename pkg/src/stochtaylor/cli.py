"""Command-line entry point: ``stochtaylor <subcommand> [flags]``.

Every artifact starts with the full run configuration and a version stamp.
Nothing time-dependent is written, so a rerun with the same flags and seed
reproduces the file byte for byte, whatever ``--workers`` is.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, CostError, StochTaylorError, ValidationError

USAGE_ERRORS = (ConfigurationError, CostError, ValidationError)


@dataclass
class RunConfig:
    subcommand: str
    seed: int
    out: str | None
    format: str
    options: dict = field(default_factory=dict)


def version_stamp() -> str:
    """Package version plus the short commit hash of the source tree, when known."""
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# value formatting --------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, Fraction):
        return _fmt(obj)
    return obj


def render(cfg: RunConfig, columns: list[str], rows: list[dict], summary: dict | None = None) -> str:
    header = {"config": asdict(cfg), "version": version_stamp()}
    if cfg.format == "json":
        doc = dict(header)
        if summary is not None:
            doc["summary"] = summary
        doc["rows"] = [{c: r.get(c) for c in columns} for r in rows]
        return json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_json_safe(header["config"]), sort_keys=True) + "\n")
    buf.write("# version: " + header["version"] + "\n")
    if summary is not None:
        buf.write("# summary: " + json.dumps(_json_safe(summary), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(cfg: RunConfig, text: str):
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# argument helpers ----------------------------------------------------------

def _number(tok: str) -> float:
    tok = tok.strip()
    if "^" in tok:
        base, exp = tok.split("^", 1)
        return float(base) ** float(exp)
    return float(Fraction(tok))


def parse_grid(text: str) -> list[float]:
    """``lo:hi:n`` (linear), ``lo:hi:n:log`` (geometric) or a comma list; ``2^-4`` allowed."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
            raise ConfigurationError(f"bad grid {text!r}: expected lo:hi:n or lo:hi:n:log")
        lo, hi, n = _number(parts[0]), _number(parts[1]), int(parts[2])
        if n < 2:
            raise ConfigurationError("grid needs at least two points")
        if len(parts) == 4:
            if lo <= 0 or hi <= 0:
                raise ConfigurationError("geometric grid needs positive end points")
            a, b = math.log2(lo), math.log2(hi)
            return [2.0 ** (a + (b - a) * k / (n - 1)) for k in range(n)]
        return [lo + (hi - lo) * k / (n - 1) for k in range(n)]
    return [_number(tok) for tok in text.split(",") if tok.strip()]


def parse_vectors(text: str) -> list[tuple[Fraction, ...]]:
    """``1,1/2,0;0,1,2`` -> vectors (y^0, ..., y^d) with exact entries."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            out.append(tuple(Fraction(tok.strip()) for tok in chunk.split(",")))
    if not out:
        raise ConfigurationError("no vectors given")
    return out


def _word_label(w) -> str:
    return "".join(str(i) for i in w) if max(w, default=0) < 10 else ".".join(map(str, w))


# subcommands -------------------------------------------------------------

def cmd_sig(args, cfg):
    from .signature import chen_strichartz_coeffs, log_signature, path_signature, read_path
    from .words import words_up_to

    path = read_path(Path(args.path).read_text())
    if not args.exact:
        path = type(path)(tuple(float(t) for t in path.breakpoints),
                          tuple(tuple(float(a) for a in s) for s in path.slopes))
    sig = path_signature(path, args.degree, args.grading)
    logsig = log_signature(path, args.degree, args.grading)
    lam = chen_strichartz_coeffs(sig)
    rows = [{"word": _word_label(w), "signature": sig[w], "log_signature": logsig[w], "lambda": lam.get(w, 0)}
            for w in words_up_to(path.dim, args.degree, args.grading)]
    summary = {"dim": path.dim, "segments": path.n_segments, "displacement": list(path.displacement())}
    return ["word", "signature", "log_signature", "lambda"], rows, summary


def cmd_bch(args, cfg):
    from .lie import bch_beta_explicit, bch_dynkin
    from .words import words_up_to

    vectors = parse_vectors(args.vectors)
    series = bch_dynkin(vectors, args.degree, args.grading)
    rows = []
    for w in words_up_to(len(vectors[0]) - 1, args.degree, args.grading):
        row = {"word": _word_label(w), "coefficient": series[w]}
        if args.explicit:
            row["explicit"] = bch_beta_explicit(vectors, w)
        rows.append(row)
    cols = ["word", "coefficient"] + (["explicit"] if args.explicit else [])
    return cols, rows, {"factors": len(vectors)}


def cmd_moments(args, cfg):
    from .brownian import expected_signature_mc, moments_table

    est = expected_signature_mc(args.dim, args.time, args.degree, args.samples, args.level,
                                args.seed, args.workers)
    rows = moments_table(est, args.time)
    worst = max((abs(r["z_score"]) for r in rows), default=0.0)
    summary = {"words": len(rows), "max_abs_z": worst,
               "over_3_se": sum(abs(r["z_score"]) > 3 for r in rows),
               "over_4_se": sum(abs(r["z_score"]) > 4 for r in rows)}
    return ["word", "estimate", "std_error", "exact", "z_score"], rows, summary


def cmd_castell(args, cfg):
    from .flows import (parse_system, quartic_observable, rotation_benchmark,
                        strong_error_experiment, weak_error_experiment)

    system = parse_system(Path(args.system).read_text()) if args.system else rotation_benchmark()
    grid = parse_grid(args.tgrid)
    common = dict(samples=args.samples, level=args.level, seed=args.seed,
                  substeps=args.substeps, workers=args.workers)
    strong = strong_error_experiment(system, args.degree, grid, **common)
    observable = quartic_observable(system.n) if args.observable is None else _parse_observable(args.observable, system.n)
    weak = weak_error_experiment(system, observable, args.degree, grid, **common)
    rows = [{"t": s["t"], "strong_error": s["error"], "strong_stderr": s["stderr"],
             "weak_error": w["error"], "weak_stderr": w["stderr"]}
            for s, w in zip(strong.rows, weak.rows)]
    summary = {"strong_slope": strong.slope, "strong_ci95": list(strong.slope_ci),
               "weak_slope": weak.slope, "weak_ci95": list(weak.slope_ci),
               "theory_strong": (args.degree + 1) / 2, "observable": repr(observable)}
    return ["t", "strong_error", "strong_stderr", "weak_error", "weak_stderr"], rows, summary


def _parse_observable(src: str, n: int):
    from .flows import parse_system

    # reuse the system parser's polynomial reader on a one-field stub
    stub = f"n {n}\nd 0\nV0: " + ", ".join([src] + ["0"] * (n - 1)) + "\n"
    return parse_system(stub).fields[0].components[0]


def cmd_heat(args, cfg):
    import numpy as np

    from .heat import (StructureConstants, a1_expansion_check, kde_density_at,
                       sample_tangent_variables)

    if Path(args.omega).is_file():
        omega = StructureConstants.from_text(Path(args.omega).read_text())
    else:
        omega = StructureConstants.preset(args.omega, args.dim)
    grid = parse_grid(args.tgrid)
    res = a1_expansion_check(omega, grid, args.tol)
    rows = []
    for t, v in zip(res.t_grid, res.normalized):
        row = {"t": t, "q_t": v / (2 * math.pi * t) ** (omega.d / 2), "normalized": v,
               "fit": res.intercept + res.slope * t}
        if args.samples:
            theta = sample_tangent_variables(omega, t, args.samples, args.level, args.seed, args.workers)
            kde = kde_density_at(theta, np.zeros(omega.d), factor=args.bandwidth_factor)
            scale = (2 * math.pi * t) ** (omega.d / 2)
            row["mc_normalized"] = kde.value * scale
            row["mc_stderr"] = kde.stderr * scale
            row["mc_half_bandwidth"] = kde.half_bandwidth_value * scale
        rows.append(row)
    summary = {"slope": res.slope, "intercept": res.intercept, "expected_slope": res.expected_slope,
               "rel_deviation": res.rel_deviation, "sum_omega_sq": omega.sum_sq}
    cols = ["t", "q_t", "normalized", "fit"] + (["mc_normalized", "mc_stderr", "mc_half_bandwidth"] if args.samples else [])
    return cols, rows, summary


def cmd_gauss_bonnet(args, cfg):
    from .clifford import CurvatureTensor, gauss_bonnet_model, local_chern_identity_check

    if args.curvature:
        R = CurvatureTensor.from_text(Path(args.curvature).read_text())
        check = local_chern_identity_check(R)
        lhs, rhs, res = check.as_floats(R.d)
        row = {"model": "file", "d": R.d, "omega": rhs, "supertrace_side": lhs,
               "discrepancy": res, "chi": None,
               "omega_coefficient_of_pi_power": check.rhs, "exact_residual": check.residual}
    else:
        r = gauss_bonnet_model(args.model, args.radius)
        row = {"model": r.model, "d": r.d, "omega": r.omega, "supertrace_side": r.supertrace_side,
               "discrepancy": r.discrepancy, "chi": r.chi, "chi_quadrature": r.chi_quadrature,
               "volume": r.volume, "convention": r.convention}
    cols = list(row)
    return cols, [row], None


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed of the random streams")
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")

    p = argparse.ArgumentParser(prog="stochtaylor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("sig", parents=[common], help="signature, log-signature and Lambda table",
                       description="Columns: word, signature, log_signature, lambda.")
    s.add_argument("--path", required=True, help="path file: lines 't_start t_end a_1 .. a_d'")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--grading", choices=("scaling", "length"), default="scaling")
    s.add_argument("--exact", action=argparse.BooleanOptionalAction, default=True,
                   help="rational arithmetic (default) or floats")

    s = sub.add_parser("bch", parents=[common], help="BCH-Dynkin Lie series of a product of exponentials",
                       description="Columns: word, coefficient[, explicit].")
    s.add_argument("--vectors", required=True, help="e.g. '1,1/2,0;0,1,2' (each vector is y^0..y^d)")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--grading", choices=("scaling", "length"), default="scaling")
    s.add_argument("--explicit", action="store_true", help="also evaluate the permutation-sum formula")

    s = sub.add_parser("moments", parents=[common], help="Monte Carlo vs exact Brownian signature moments",
                       description="Columns: word, estimate, std_error, exact, z_score.")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--time", type=float, default=1.0)
    s.add_argument("--degree", type=int, default=4)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--level", type=int, default=10)

    s = sub.add_parser("castell", parents=[common], help="strong and weak error of the Castell scheme",
                       description="Columns: t, strong_error, strong_stderr, weak_error, weak_stderr.")
    s.add_argument("--system", default=None, help="system file (default: rotation benchmark)")
    s.add_argument("--degree", type=int, default=2, help="truncation N in {1, 2, 3}")
    s.add_argument("--tgrid", default="2^-4:2^-9:6:log")
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--level", type=int, default=6)
    s.add_argument("--substeps", type=int, default=4)
    s.add_argument("--observable", default=None, help="polynomial in x1..xn (default x1^4 + x2^4 + x1 x2)")

    s = sub.add_parser("heat", parents=[common], help="tangent-variable density and the a_1 slope",
                       description="Columns: t, q_t, normalized, fit[, mc_normalized, mc_stderr, mc_half_bandwidth].")
    s.add_argument("--omega", default="su2-epsilon", help="'zero', 'su2-epsilon' or a file")
    s.add_argument("--dim", type=int, default=3, help="dimension for the 'zero' preset")
    s.add_argument("--tgrid", default="1e-3:1e-2:8")
    s.add_argument("--tol", type=float, default=1e-10, help="quadrature relative tolerance")
    s.add_argument("--samples", type=int, default=0, help="also run the Monte Carlo route with this many samples")
    s.add_argument("--level", type=int, default=6)
    s.add_argument("--bandwidth-factor", type=float, default=1.0)

    s = sub.add_parser("gauss-bonnet", parents=[common], help="Euler form, supertrace side and chi",
                       description="Columns: model, d, omega, supertrace_side, discrepancy, chi, ...")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--model", default="sphere-d2", choices=("sphere-d2", "sphere-d4", "flat-torus-d2"))
    g.add_argument("--curvature", default=None, help="file of nonzero 'i j k l value' entries")
    s.add_argument("--radius", type=float, default=1.0)
    return p


COMMANDS = {"sig": cmd_sig, "bch": cmd_bch, "moments": cmd_moments, "castell": cmd_castell,
            "heat": cmd_heat, "gauss-bonnet": cmd_gauss_bonnet}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    opts = {k: v for k, v in sorted(vars(args).items())
            if k not in ("subcommand", "seed", "out", "format", "workers")}
    # the worker count is left out of the echo: it cannot change the results
    cfg = RunConfig(args.subcommand, args.seed, args.out, args.format, opts)
    if args.workers < 1:
        print("stochtaylor: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cols, rows, summary = COMMANDS[args.subcommand](args, cfg)
        emit(cfg, render(cfg, cols, rows, summary))
    except (OSError, *USAGE_ERRORS) as exc:
        print(f"stochtaylor {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    except (StochTaylorError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"stochtaylor {args.subcommand}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
