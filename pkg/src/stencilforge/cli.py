"""Command-line entry point: ``stencilforge demo|codegen|bench``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (CflViolation, NonConvergence, StencilForgeError,
                     UnknownDemo)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


def _shape(text):
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}")
    if len(dims) not in (2, 3) or min(dims) < 4:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}")
    return dims


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}")


def _words(text):
    return tuple(w for w in text.split(",") if w)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="stencilforge",
                                 description="Finite-difference stencil "
                                 "compiler demos, C emission and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("demo", help="run a worked example")
    d.add_argument("name", help="convection, laplace or acoustic")
    d.add_argument("--outdir", type=Path, default=None,
                   help="directory for field dumps")
    d.add_argument("--dse", default="advanced")
    d.add_argument("--dle", default="advanced")
    d.add_argument("--dtype", choices=("float64", "float32"),
                   default="float64")
    d.add_argument("--nx", type=int, default=None)
    d.add_argument("--ny", type=int, default=None)
    d.add_argument("--steps", type=int, default=100,
                   help="convection time steps")
    d.add_argument("--c", type=float, default=1.0)
    d.add_argument("--dt", type=float, default=0.005)
    d.add_argument("--tol", type=float, default=1e-4,
                   help="laplace stopping tolerance")
    d.add_argument("--max-iter", type=int, default=100000)
    d.add_argument("--shape", type=_shape, default=(61, 61),
                   help="acoustic grid shape, e.g. 61,61 or 41,41,41")
    d.add_argument("--order", type=int, default=2)
    d.add_argument("--ntime", type=int, default=200)
    d.add_argument("--adjoint", action="store_true",
                   help="run the acoustic adjoint test")

    c = sub.add_parser("codegen", help="emit C for a demo kernel")
    c.add_argument("--demo", required=True)
    c.add_argument("--dse", default="advanced")
    c.add_argument("--dle", default="advanced")
    c.add_argument("-o", "--output", type=Path, default=None)

    b = sub.add_parser("bench", help="run the benchmark matrix")
    b.add_argument("--shape", type=_shape, default=(64, 64, 64))
    b.add_argument("--orders", type=_ints, default=(2, 4, 8, 16))
    b.add_argument("--dse", type=_words, default=("basic", "advanced"))
    b.add_argument("--dle", type=_words, default=("basic", "advanced"))
    b.add_argument("--steps", type=int, default=4)
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--autotune", action="store_true")
    b.add_argument("--json", type=Path, default=None,
                   help="write JSON lines here")
    return ap


def _cmd_demo(args):
    from .demos import demo_acoustic, demo_convection, demo_laplace

    dtype = np.dtype(args.dtype)
    common = dict(outdir=args.outdir, dse=args.dse, dle=args.dle, dtype=dtype)
    if args.name == "convection":
        res = demo_convection(nx=args.nx or 81, ny=args.ny or 81,
                              steps=args.steps, c=args.c, dt=args.dt,
                              **common)
    elif args.name == "laplace":
        res = demo_laplace(nx=args.nx or 31, ny=args.ny or 31, tol=args.tol,
                           max_iter=args.max_iter, **common)
    elif args.name == "acoustic":
        res = demo_acoustic(shape=args.shape, order=args.order,
                            ntime=args.ntime, adjoint_test=args.adjoint,
                            **common)
    else:
        raise UnknownDemo(f"unknown demo {args.name!r}")
    report = {"demo": res.name, "steps": res.steps, "ok": res.ok,
              "diagnostics": {k: _jsonable(v)
                              for k, v in res.diagnostics.items()},
              "dumps": {k: str(v) for k, v in res.dumps.items()}}
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if res.ok else EXIT_NUMERIC


def _cmd_codegen(args):
    from .demos import demo_operator

    src = demo_operator(args.demo, dse=args.dse, dle=args.dle).ccode()
    if args.output is None:
        sys.stdout.write(src)
    else:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_bytes(src.encode("utf-8"))
        print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_bench(args):
    from .bench import benchmark, write_reports

    reports = benchmark(shape=args.shape, orders=args.orders,
                        dse_levels=args.dse, dle_levels=args.dle,
                        steps=args.steps, repeats=args.repeats,
                        autotune=args.autotune)
    for r in reports:
        print(f"so={r.space_order:<3d} dse={r.dse:<9s} dle={r.dle:<12s} "
              f"{r.runtime_s:8.4f}s  {r.gflops:7.3f} GFlops/s  "
              f"flops/pt={r.flops_per_point:<4d} oi={r.oi:.3f} "
              f"block={r.block}")
    if args.json is not None:
        write_reports(args.json, reports)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handler = {"demo": _cmd_demo, "codegen": _cmd_codegen,
               "bench": _cmd_bench}[args.command]
    try:
        return handler(args)
    except UnknownDemo as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, CflViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StencilForgeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
