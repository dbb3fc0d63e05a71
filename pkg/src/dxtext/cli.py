"""Command-line interface: ``dxtext sanitize | dist | experiment``.

Exit codes are 0 on success, 1 for usage errors (bad flags or parameter
ranges) and 2 for runtime failures (unreadable files, malformed
vocabularies, numerical failures). Every failure prints one line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import List, Optional, Sequence

from . import __version__
from .analysis import (
    curves_to_csv,
    curves_to_json,
    proportions_1d,
    proportions_experiment,
    selection_probability_curves,
    table_quantities,
)
from .dotprod import (
    DEFAULT_TRIALS,
    DistParams,
    QuadratureError,
    angular_tail,
    cdf_z_monte_carlo_many,
    cdf_z_numeric,
    chebyshev_bound,
    gamma_tail_lower,
    gamma_tail_upper,
    moment_angular,
    pdf_angular,
    pdf_radius,
    pdf_z_numeric,
    z_concentration_bound,
)
from .mechanisms import LAPLACE, VARIANTS, PrivacyParams, sanitize_text
from .noise import make_rng
from .vocab import Vocabulary, VocabularyFormatError, load_vocabulary, synthetic_vocabulary

PROG = "dxtext"
BOUND_KINDS = ("gamma-upper", "gamma-lower", "angular", "z-concentration", "chebyshev")
PDF_KINDS = ("z", "angular", "radius")
EXPERIMENTS = ("proportions", "proportions-1d", "table2", "curves")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports errors on one line and exits with code 1."""

    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# argument types


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _float_list(text: str) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers: {text!r}")
    return vals


def _grid(text: str) -> List[float]:
    vals = _float_list(text)
    if not all(v > 0 for v in vals):
        raise argparse.ArgumentTypeError(f"epsilon values must be positive: {text!r}")
    return vals


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative: {text!r}")
    return v


def _synthetic_shape(text: str):
    parts = text.lower().split("x")
    try:
        size, dim = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM, e.g. 10000x100: {text!r}")
    if size < 2 or dim < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 words and 2 dimensions: {text!r}")
    return size, dim


# --------------------------------------------------------------------------
# parser


def _add_vocab_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--vocab", metavar="PATH", help="GloVe-style text file or binary cache")
    g.add_argument("--synthetic", metavar="NxM", type=_synthetic_shape,
                   help="seeded Gaussian vocabulary of N words in M dimensions")
    p.add_argument("--vocab-seed", type=_seed, default=0, help="seed for --synthetic (default 0)")


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="report format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Text sanitization with the multidimensional Laplace mechanism.",
                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sanitize", help="sanitize text word by word", allow_abbrev=False)
    _add_vocab_source(s)
    s.add_argument("--epsilon", type=_positive_float, required=True, help="per-word privacy parameter")
    s.add_argument("--variant", choices=VARIANTS, default=LAPLACE, help="mechanism (default %(default)s)")
    s.add_argument("--c", type=_positive_float, help="temperature for laplace-dx-fixed")
    _add_seed(s)
    s.add_argument("--input", metavar="PATH", help="read text from this file instead of stdin")
    s.add_argument("--report", metavar="PATH", help="write a JSON-lines token report")

    d = sub.add_parser("dist", help="noisy dot-product distribution numerics", allow_abbrev=False)
    dsub = d.add_subparsers(dest="query", required=True, parser_class=_Parser)

    pdf = dsub.add_parser("pdf", help="density of Z, K or R", allow_abbrev=False)
    pdf.add_argument("--kind", choices=PDF_KINDS, default="z", help="which density (default z)")
    pdf.add_argument("--x", type=_float_list, required=True, help="comma-separated evaluation points")
    pdf.add_argument("--n", type=int, required=True, help="dimension")
    pdf.add_argument("--epsilon", type=_positive_float, default=1.0, help="privacy parameter (default 1)")

    cdf = dsub.add_parser("cdf", help="Pr[Z <= z]", allow_abbrev=False)
    cdf.add_argument("--z", type=_float_list, required=True, help="comma-separated thresholds")
    cdf.add_argument("--n", type=int, required=True, help="dimension")
    cdf.add_argument("--epsilon", type=_positive_float, required=True, help="privacy parameter")
    cdf.add_argument("--method", choices=("monte-carlo", "quadrature"), default="monte-carlo",
                     help="estimator (default monte-carlo)")
    cdf.add_argument("--trials", type=_count, default=DEFAULT_TRIALS, help="Monte Carlo draws")
    cdf.add_argument("--workers", type=_count, default=1, help="Monte Carlo threads (result does not depend on it)")
    _add_seed(cdf)

    mom = dsub.add_parser("moment", help="E[K^j] of the angular component", allow_abbrev=False)
    mom.add_argument("--j", type=_int_list, required=True, help="comma-separated moment orders")
    mom.add_argument("--n", type=int, required=True, help="dimension")

    b = dsub.add_parser("bound", help="tail and concentration bounds", allow_abbrev=False)
    b.add_argument("--kind", choices=BOUND_KINDS, required=True)
    b.add_argument("--c", type=float, help="constant for gamma-upper, gamma-lower and angular")
    b.add_argument("--c1", type=float, help="angular constant for z-concentration")
    b.add_argument("--c2", type=float, help="radius constant for z-concentration")
    b.add_argument("--n", type=int, default=None, help="dimension")
    b.add_argument("--epsilon", type=_positive_float, default=1.0, help="privacy parameter for chebyshev")
    b.add_argument("--m", type=int, help="number of averaged draws for chebyshev")
    b.add_argument("--delta", type=float, help="deviation for chebyshev")

    e = sub.add_parser("experiment", help="reproduce proportion, gap and curve reports", allow_abbrev=False)
    e.add_argument("kind", choices=EXPERIMENTS)
    src = e.add_mutually_exclusive_group()
    src.add_argument("--vocab", metavar="PATH", help="GloVe-style text file or binary cache")
    src.add_argument("--synthetic", metavar="NxM", type=_synthetic_shape,
                     help="seeded Gaussian vocabulary of N words in M dimensions")
    e.add_argument("--vocab-seed", type=_seed, default=0, help="seed for --synthetic (default 0)")
    e.add_argument("--grid", type=_grid, default=[1.0, 5.0, 10.0, 20.0, 40.0],
                   help="comma-separated epsilon values (default 1,5,10,20,40)")
    e.add_argument("--variant", choices=VARIANTS, default=LAPLACE, help="mechanism for proportions")
    e.add_argument("--c", type=_positive_float, help="temperature for laplace-dx-fixed")
    e.add_argument("--samples", type=_count, default=5000, help="number of sampled words (default 5000)")
    e.add_argument("--close-k", type=_count, default=100, help="largest rank counted as close (default 100)")
    e.add_argument("--trials-per-word", type=_count, default=1, help="mechanism runs per sampled word")
    e.add_argument("--far-rank", type=_count, default=101, help="far neighbor rank for table2 (default 101)")
    e.add_argument("--trials", type=_count, default=DEFAULT_TRIALS,
                   help="draws per epsilon for proportions-1d and curves")
    e.add_argument("--a", type=int, default=400000, help="true value for proportions-1d (default 400000)")
    e.add_argument("--close-radius", type=int, default=100, help="close window for proportions-1d (default 100)")
    _add_seed(e)
    _add_output(e)
    return parser


# --------------------------------------------------------------------------
# commands


def _vocabulary(args) -> Vocabulary:
    if getattr(args, "vocab", None):
        return load_vocabulary(args.vocab)
    if getattr(args, "synthetic", None):
        size, dim = args.synthetic
        return synthetic_vocabulary(size, dim, seed=args.vocab_seed)
    raise UsageError("one of --vocab or --synthetic is required")


def _emit(text: str, path: Optional[str], stdout) -> None:
    if path is None:
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_sanitize(args, stdin, stdout, stderr) -> int:
    params = PrivacyParams(args.epsilon, args.variant, args.c)
    vocab = _vocabulary(args)
    if args.input:
        with open(args.input, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        data = stdin.buffer.read() if hasattr(stdin, "buffer") else stdin.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    result = sanitize_text(vocab, text, params, make_rng(args.seed))
    stdout.write(result.text)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="") as fh:
            for tok in result.tokens:
                fh.write(json.dumps(tok.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    m = result.sanitized_count
    stderr.write(f"{PROG}: sanitized {m} words at epsilon={args.epsilon!r}; "
                 f"composed guarantee {result.composed_epsilon!r}\n")
    return 0


def _dist_pdf(args) -> str:
    rows = []
    for x in args.x:
        if args.kind == "z":
            v = pdf_z_numeric(x, DistParams(args.n, args.epsilon))
        elif args.kind == "angular":
            DistParams(args.n, 1.0)
            v = float(pdf_angular(x, args.n))
        else:
            v = float(pdf_radius(x, DistParams(args.n, args.epsilon)))
        rows.append((args.kind, x, args.n, args.epsilon, v))
    return _csv(["kind", "x", "n", "epsilon", "pdf"], rows)


def _dist_cdf(args) -> str:
    params = DistParams(args.n, args.epsilon)
    if args.method == "quadrature":
        rows = [(z, args.n, args.epsilon, "quadrature", cdf_z_numeric(z, params), None, None) for z in args.z]
    else:
        est = cdf_z_monte_carlo_many(args.z, params, args.trials, make_rng(args.seed), args.workers)
        rows = [(z, args.n, args.epsilon, "monte-carlo", e.value, e.trials, e.standard_error)
                for z, e in zip(args.z, est)]
    return _csv(["z", "n", "epsilon", "method", "cdf", "trials", "standard_error"], rows)


def _dist_moment(args) -> str:
    rows = [(j, args.n, moment_angular(j, args.n)) for j in args.j]
    return _csv(["j", "n", "moment"], rows)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"bound --kind {args.kind} requires {', '.join(missing)}")


def _dist_bound(args) -> str:
    k = args.kind
    if k in ("gamma-upper", "gamma-lower"):
        _require(args, "c", "n")
        fn = gamma_tail_upper if k == "gamma-upper" else gamma_tail_lower
        row = (k, args.c, None, None, args.n, None, None, None, fn(args.c, args.n))
    elif k == "angular":
        _require(args, "c")
        row = (k, args.c, None, None, args.n, None, None, None, angular_tail(args.c, args.n))
    elif k == "z-concentration":
        _require(args, "c1", "c2", "n")
        row = (k, None, args.c1, args.c2, args.n, None, None, None, z_concentration_bound(args.c1, args.c2, args.n))
    else:
        _require(args, "m", "delta", "n")
        v = chebyshev_bound(args.m, args.delta, DistParams(args.n, args.epsilon))
        row = (k, None, None, None, args.n, args.epsilon, args.m, args.delta, v)
    return _csv(["kind", "c", "c1", "c2", "n", "epsilon", "m", "delta", "bound"], [row])


def cmd_dist(args, stdout) -> int:
    handler = {"pdf": _dist_pdf, "cdf": _dist_cdf, "moment": _dist_moment, "bound": _dist_bound}[args.query]
    stdout.write(handler(args))
    return 0


def cmd_experiment(args, stdout) -> int:
    rng = make_rng(args.seed)
    fmt = args.format
    if args.kind == "proportions-1d":
        report = proportions_1d(args.a, args.grid, args.trials, rng, args.close_radius)
        text = report.to_csv() if fmt == "csv" else report.to_json()
    else:
        if args.kind == "proportions":
            params = PrivacyParams(args.grid[0], args.variant, args.c)
        vocab = _vocabulary(args)
        if args.kind == "proportions":
            report = proportions_experiment(vocab, args.grid, rng, params.variant, params.c,
                                            args.samples, args.close_k, args.trials_per_word)
            text = report.to_csv() if fmt == "csv" else report.to_json()
        elif args.kind == "table2":
            q = table_quantities(vocab, args.samples, rng, args.far_rank)
            text = q.to_csv() if fmt == "csv" else q.to_json()
        else:
            q = table_quantities(vocab, args.samples, rng, args.far_rank)
            pts = selection_probability_curves(q, vocab.dimension, args.grid, args.trials, rng)
            text = curves_to_csv(pts) if fmt == "csv" else curves_to_json(pts)
    _emit(text, args.output, stdout)
    return 0


def main(argv: Optional[Sequence[str]] = None, stdin=None, stdout=None, stderr=None) -> int:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sanitize":
            return cmd_sanitize(args, stdin, stdout, stderr)
        if args.command == "dist":
            return cmd_dist(args, stdout)
        return cmd_experiment(args, stdout)
    except UsageError as exc:
        stderr.write(f"{PROG}: error: {exc}\n")
        return 1
    except (VocabularyFormatError, OSError, QuadratureError, UnicodeDecodeError) as exc:
        stderr.write(f"{PROG}: error: {_one_line(exc)}\n")
        return 2
    except (ValueError, KeyError) as exc:
        stderr.write(f"{PROG}: error: {_one_line(exc)}\n")
        return 1
    except MemoryError:
        stderr.write(f"{PROG}: error: out of memory\n")
        return 2


def _one_line(exc: BaseException) -> str:
    msg = str(exc) or type(exc).__name__
    return " ".join(msg.split())


if __name__ == "__main__":
    sys.exit(main())
