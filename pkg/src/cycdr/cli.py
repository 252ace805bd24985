"""Command-line front end: ``cycdr solve | bench | trace``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import geometry as g
from .bench import BenchmarkError, Method, emit_table, run_suite
from .instances import SchemaError, gen_x0, read_instance, substream
from .operators import (
    AlternatingProjections,
    AveragedDR,
    CyclicDR,
    NonFiniteIterateError,
    Termination,
    TwoSetDR,
    error_metric,
    iterate,
)
from .product import candidate, embed_diagonal, lift

EXIT_OK, EXIT_ERROR, EXIT_CAP = 0, 1, 2

# Planar scenarios with fixed parameters: (sets, default x0, description).
DEMOS = {
    "two-lines": (
        [g.Hyperplane([1.0, 0.0], 0.0), g.Hyperplane([0.6, 0.8], 0.0)],
        [1.0, 1.0],
        "lines through the origin with unit normals (1,0) and (0.6,0.8)",
    ),
    "circle-line": (
        [g.Ball([0.0, 0.0], 1.0), g.Hyperplane([0.0, 1.0], 0.5)],
        [2.0, 2.0],
        "unit disc and the line y = 0.5",
    ),
    "two-circles": (
        [g.Sphere([0.0, 0.0], 1.0), g.Sphere([1.2, 0.4], 1.0)],
        [-1.5, 1.5],
        "unit circles centred at (0,0) and (1.2,0.4)",
    ),
    "three-sets": (
        [g.Ball([0.0, 0.0], 1.0), g.Ball([1.2, 0.0], 1.0), g.Hyperplane([0.0, 1.0], 0.3)],
        [-2.0, 2.5],
        "unit discs at (0,0) and (1.2,0) and the line y = 0.3",
    ),
    "ball-point": (
        [g.Ball([0.0, 0.0], 1.0), g.Singleton([2.0, 0.0])],
        [0.5, 1.5],
        "unit disc and the exterior point (2,0)",
    ),
    "ball-point-inside": (
        [g.Ball([0.0, 0.0], 1.0), g.Singleton([0.3, 0.4])],
        [2.0, 1.5],
        "unit disc and the interior point (0.3,0.4)",
    ),
    "ball-line-disjoint": (
        [g.Ball([0.0, 0.0], 1.0), g.Hyperplane([0.0, 1.0], 2.0)],
        [3.0, -1.0],
        "unit disc and the line y = 2 (distance 1 apart)",
    ),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags exit with status 1, not argparse's default 2 (reserved for the cap)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid number list {text!r}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid integer list {text!r}") from exc


def _default_seed() -> int:
    try:
        return int(os.environ.get("CYCDR_SEED", "0"))
    except ValueError:
        return 0


def _load_problem(args):
    """Return (sets, x0) from --instance/--demo plus --x0/--seed."""
    if args.demo is not None:
        if args.demo not in DEMOS:
            raise UsageError(f"unknown demo {args.demo!r}; choose from {', '.join(DEMOS)}")
        sets, default_x0, _ = DEMOS[args.demo]
        n = 2
    else:
        try:
            with open(args.instance, "rb") as fh:
                inst = read_instance(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read instance: {exc}") from exc
        sets, n, default_x0 = list(inst.sets), inst.dim, None
    if args.x0 is not None:
        x0 = np.array(_float_list(args.x0))
        if x0.size != n:
            raise UsageError(f"--x0 has {x0.size} coordinates, problem dimension is {n}")
    elif default_x0 is not None:
        x0 = np.array(default_x0, dtype=float)
    else:
        x0 = gen_x0(n, args.seed)
    return sets, x0


def _build(method: Method, sets):
    """Operator, start-point map and single-space extraction for `method`."""
    n = sets[0].dim
    if method is Method.PRODUCT_DR:
        C, D = lift(sets)
        return TwoSetDR(C, D), (lambda x: embed_diagonal(x, len(sets))), (lambda X: candidate(X, n))
    op = {Method.CYCLIC: CyclicDR, Method.AVERAGED: AveragedDR, Method.MAP: AlternatingProjections}[method](sets)
    return op, (lambda x: x), (lambda x: x)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def cmd_solve(args) -> int:
    sets, x0 = _load_problem(args)
    method = Method(args.method)
    if method is not Method.PRODUCT_DR and len(sets) < 2:
        raise UsageError(f"method {method.value} needs at least two sets")
    op, start, extract = _build(method, sets)
    rng = substream(args.seed, "projection")
    trace = iterate(op, start(x0), args.eps, args.max_iter, rng, record=args.trace is not None, error_sets=())
    x = extract(trace.final)
    err = error_metric(sets, x, rng)
    status = trace.termination.value
    print(f"status={status} iters={trace.iterations} error={err:.6e}")
    print("x=" + ",".join(_fmt(c) for c in x))
    if args.trace:
        _write(args.trace, trace.to_json() if args.trace.endswith(".json") else trace.to_csv())
    if args.out:
        doc = {
            "status": status,
            "iterations": trace.iterations,
            "error": err,
            "x": [float(c) for c in x],
            "elapsed_s": trace.elapsed,
        }
        _write(args.out, json.dumps(doc, indent=1))
    return EXIT_OK if trace.termination is Termination.CONVERGED else EXIT_CAP


def cmd_bench(args) -> int:
    ns, Ns = _int_list(args.n), _int_list(args.N)
    eps_list = _float_list(args.eps)
    try:
        methods = [Method(m) for m in args.methods.split(",") if m.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not ns or not Ns or not eps_list or not methods:
        raise UsageError("--n, --N, --eps and --methods need at least one value each")
    progress = logging.getLogger("cycdr.bench")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    saved_level = progress.level
    if not args.quiet:
        progress.addHandler(handler)
        progress.setLevel(logging.INFO)
    try:
        report = run_suite(
            args.problem,
            [(n, N) for n in ns for N in Ns],
            eps_list,
            methods,
            trials=args.trials,
            base_seed=args.seed,
            cap=args.cap,
        )
    finally:
        progress.removeHandler(handler)
        progress.setLevel(saved_level)
    table = emit_table(report, args.format)
    if args.out:
        _write(args.out, table.decode("utf-8"))
    else:
        sys.stdout.write(table.decode("utf-8"))
    for r in report.rows:
        print(
            f"n={r.n} N={r.N} method={r.method} eps={r.eps:g} "
            f"iters={r.iter_mean:.1f}({r.iter_max}) err={r.err_mean:.3g}({r.err_max:.3g})",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_trace(args) -> int:
    if not args.svg and not args.csv:
        raise UsageError("trace needs --svg and/or --csv")
    sets, x0 = _load_problem(args)
    if sets[0].dim != 2:
        raise UsageError(f"traces are only drawn in the plane; this problem has dimension {sets[0].dim}")
    method = Method(args.method)
    op, start, extract = _build(method, sets)
    rng = substream(args.seed, "projection")
    trace = iterate(op, start(x0), args.eps, args.max_iter, rng, record=True, error_sets=())
    if args.csv:
        _write(args.csv, trace.to_csv())
    if args.svg:
        outer = [extract(x) for x in trace.iterates]
        if method is Method.PRODUCT_DR:
            # the N blocks of each product iterate stand in for the sub-steps
            subs = [b for X in trace.iterates[1:] for b in X.reshape(len(sets), 2)]
        else:
            subs = list(trace.substeps)
        _write(args.svg, render_svg(sets, outer, subs))
    x = extract(trace.final)
    status = trace.termination.value
    print(f"status={status} iters={trace.iterations} error={error_metric(sets, x, rng):.6e}")
    return EXIT_OK


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _c(v: float) -> str:
    return f"{v:.9g}"


def render_svg(sets, outer, substeps) -> str:
    """SVG 1.1 drawing of planar sets, the outer iterates and the sub-steps.

    The view box is the bounding box of the plotted points plus a 10%
    margin on every side; the y axis points up.
    """
    pts = np.array([*outer, *substeps], dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, max(float(span.max()), 1.0))
    lo, hi = lo - 0.1 * span, hi + 0.1 * span
    w, h = hi - lo
    stroke = max(w, h) / 400
    reach = 4 * max(w, h) + float(np.abs(pts).max())
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{_c(lo[0])} {_c(-hi[1])} {_c(w)} {_c(h)}" width="600" height="{_c(600 * h / w)}">',
        f'<g class="sets" fill="none" stroke="#1f5fbf" stroke-width="{_c(2 * stroke)}">',
    ]

    def line(p, d):
        a, b = p - reach * d, p + reach * d
        out.append(f'<line x1="{_c(a[0])}" y1="{_c(-a[1])}" x2="{_c(b[0])}" y2="{_c(-b[1])}"/>')

    for s in sets:
        if isinstance(s, g.Ball):
            out.append(f'<circle cx="{_c(s.center[0])}" cy="{_c(-s.center[1])}" r="{_c(s.radius)}" '
                       'fill="#1f5fbf" fill-opacity="0.15"/>')
        elif isinstance(s, g.Sphere):
            out.append(f'<circle cx="{_c(s.center[0])}" cy="{_c(-s.center[1])}" r="{_c(s.radius)}"/>')
        elif isinstance(s, (g.Hyperplane, g.HalfSpace)):
            a = s.normal
            line(s.offset * a, np.array([-a[1], a[0]]))
        elif isinstance(s, g.AffineSubspace) and s.basis.shape[0] == 1:
            line(s.anchor, s.basis[0])
        elif isinstance(s, g.Singleton) or (isinstance(s, g.AffineSubspace) and s.basis.shape[0] == 0):
            p = s.point if isinstance(s, g.Singleton) else s.anchor
            out.append(f'<circle cx="{_c(p[0])}" cy="{_c(-p[1])}" r="{_c(3 * stroke)}" fill="#1f5fbf"/>')
        elif isinstance(s, g.Box):
            out.append(f'<rect x="{_c(s.lower[0])}" y="{_c(-s.upper[1])}" '
                       f'width="{_c(s.upper[0] - s.lower[0])}" height="{_c(s.upper[1] - s.lower[1])}"/>')
    out.append("</g>")
    poly = " ".join(f"{_c(p[0])},{_c(-p[1])}" for p in outer)
    out.append(f'<polyline class="iterates" points="{poly}" fill="none" stroke="#222222" '
               f'stroke-width="{_c(stroke)}"/>')
    out.append('<g class="substeps" fill="#2a9d3a">')
    for p in substeps:
        out.append(f'<circle cx="{_c(p[0])}" cy="{_c(-p[1])}" r="{_c(2 * stroke)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _add_problem_flags(p, methods):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--demo", help=f"built-in planar demo: {', '.join(DEMOS)}")
    p.add_argument("--method", required=True, choices=methods)
    p.add_argument("--x0", help="comma-separated starting point")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help="seed for x0 and sphere tie-breaks (default: $CYCDR_SEED or 0)")
    p.add_argument("--max-iter", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cycdr", description="Cyclic and averaged Douglas-Rachford feasibility solvers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance")
    _add_problem_flags(p, [m.value for m in Method])
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--trace", help="write the iteration trace (CSV, or JSON for *.json)")
    p.add_argument("--out", help="write the result as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--problem", required=True, choices=["balls", "spheres"])
    p.add_argument("--n", required=True, help="comma-separated dimensions")
    p.add_argument("--N", required=True, help="comma-separated numbers of sets")
    p.add_argument("--eps", default="1e-3", help="comma-separated tolerances")
    p.add_argument("--methods", default="cyclic,product-dr")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--cap", type=int, default=1000)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true", help="suppress per-trial progress lines")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("trace", help="draw a planar demo trajectory")
    _add_problem_flags(p, [m.value for m in Method])
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "instance", None) is None and getattr(args, "demo", "") is None:
        parser.error("one of --instance or --demo is required")
    try:
        return args.func(args)
    except (UsageError, SchemaError, g.GeometryError, NonFiniteIterateError, BenchmarkError, ValueError) as exc:
        print(f"cycdr: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"cycdr: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
