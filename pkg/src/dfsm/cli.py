"""Command-line driver.

    dfsm run FILE [--pipeline CFG]            evaluate on wire-format stdin
    dfsm deriv FILE --wrt NAME [--emit ir|c]  print the optimized derivative
    dfsm check-grad FILE --wrt NAME           compare against central differences
    dfsm bench KERNEL --sizes 64,128 [--json] operation counts, raw vs optimized

Exit status: 0 on success, 1 when a check fails or evaluation errors, 2 for
usage, parse, type and input errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional

from . import driver, wire
from .ad import ADError, NotFree, UnsupportedIndependentType
from .codegen import CodegenError, emit_c
from .gradcheck import ShapeMismatch, check_gradient
from .interp import EvalError, compile_expr, eval_counted
from .kernels import KERNELS
from .opt.engine import FixpointExceeded
from .opt.pipeline import load_pipeline
from .parser import ParseError
from .printer import pretty
from .syntax import Array, BoolT, DOUBLE, Num, PairT
from .typecheck import TypeError as FTypeError, UnboundVariable


class UsageError(Exception):
    pass


def _read_source(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _pipeline(args):
    if getattr(args, "pipeline", None):
        try:
            return load_pipeline(_read_source(args.pipeline))
        except ValueError as err:
            raise UsageError(f"bad pipeline file: {err}") from None
    return None


def _check_nonempty(value, ty, name: str) -> None:
    if isinstance(ty, Array):
        if len(value) == 0:
            raise wire.WireError(f"shape error: {name} is empty")
        if isinstance(ty.elem, Array):
            for row in value:
                _check_nonempty(row, ty.elem, name)


def cmd_run(args) -> int:
    prog = driver.load(_read_source(args.file))
    params, _ = driver.signature(prog)
    ready = driver.prepare(prog, optimize=not args.no_opt, pipeline=_pipeline(args))
    fn = compile_expr(ready)()
    if not params:
        print(wire.format_value(fn, driver.typecheck({}, prog)))
        return 0
    records = wire.read_records(sys.stdin.read(), [t for _, t in params])
    if not records:
        raise wire.WireError("no input")
    rty = driver.typecheck(dict(params), driver.signature(prog)[1])
    for rec in records:
        for (name, ty), v in zip(params, rec):
            _check_nonempty(v, ty, name)
        out = fn
        for v in rec:
            out = out(v)
        print(wire.format_value(out, rty))
    return 0


def cmd_deriv(args) -> int:
    prog = driver.load(_read_source(args.file))
    d = driver.derivative_program(prog, args.wrt, pipeline=_pipeline(args))
    if args.emit == "c":
        sys.stdout.write(emit_c(args.name, d, soa=args.soa))
    else:
        print(pretty(d))
    return 0


def _random_value(ty, n: int, rng: random.Random):
    if ty == DOUBLE:
        return rng.uniform(-1.0, 1.0)
    if isinstance(ty, Num):
        return n
    if isinstance(ty, BoolT):
        return rng.random() < 0.5
    if isinstance(ty, PairT):
        return (_random_value(ty.left, n, rng), _random_value(ty.right, n, rng))
    if isinstance(ty, Array):
        return [_random_value(ty.elem, n, rng) for _ in range(n)]
    raise UsageError("cannot generate inputs for function-typed parameters")


def _fmt_array(a) -> str:
    if isinstance(a, list):
        return "[" + ", ".join(_fmt_array(x) for x in a) + "]"
    return "%.10g" % a


def cmd_check_grad(args) -> int:
    prog = driver.load(_read_source(args.file))
    params, _ = driver.signature(prog)
    if args.inputs:
        values = wire.read_values(_read_source(args.inputs), [t for _, t in params])
    else:
        rng = random.Random(args.seed)
        values = [_random_value(t, args.n, rng) for _, t in params]
    d = driver.derivative_program(prog, args.wrt, pipeline=_pipeline(args))
    report = check_gradient(prog, args.wrt, values, h=args.h, derivative=d)
    for idx, why in report.excluded:
        print(f"excluded {idx}: {why}")
    if args.show:
        # rows are output components, columns input components
        print("ad:", _fmt_array(report.ad))
        print("fd:", _fmt_array(report.fd))
    ok = report.passed(args.tol)
    print(f"checked {len(report.entries)} entries, excluded {len(report.excluded)}")
    print(f"max relative error {report.max_error:.3e} (tolerance {args.tol:g}): "
          + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def bench_rows(name: str, sizes: list, seed: int = 0) -> list:
    kernel = KERNELS[name]
    prog = kernel.program
    # counted on the full dual result, so the primal computation is included
    dual = driver.dual_derivative(prog, kernel.wrt)
    base = driver.prepare(dual, optimize=False)
    opt = driver.prepare(dual)
    rows = []
    for n in sizes:
        values = kernel.inputs(n, random.Random(seed))
        counts = []
        for e in (base, opt):
            fn, c = _counted(e)
            for v in values:
                fn = fn(v)
            counts.append((c.scalar_ops, c.array_allocs))
        rows.append({"size": n, "scalarOpsBase": counts[0][0], "scalarOpsOpt": counts[1][0],
                     "allocsBase": counts[0][1], "allocsOpt": counts[1][1]})
    return rows


def _counted(e):
    from .interp import Counters
    c = Counters()
    return compile_expr(e, counters=c)(), c


def cmd_bench(args) -> int:
    if args.kernel not in KERNELS:
        raise UsageError(f"unknown kernel {args.kernel!r}; choose from {', '.join(KERNELS)}")
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --sizes {args.sizes!r}") from None
    if not sizes or any(s <= 0 for s in sizes):
        raise UsageError("--sizes needs positive integers")
    rows = bench_rows(args.kernel, sizes, args.seed)
    if args.json:
        for r in rows:
            print(json.dumps(r))
    else:
        print(f"{'size':>8} {'scalarOpsBase':>14} {'scalarOpsOpt':>13} {'allocsBase':>11} {'allocsOpt':>10}")
        for r in rows:
            print(f"{r['size']:>8} {r['scalarOpsBase']:>14} {r['scalarOpsOpt']:>13} "
                  f"{r['allocsBase']:>11} {r['allocsOpt']:>10}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfsm", description="Differentiate, optimize and compile array programs.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a program on inputs read from stdin")
    r.add_argument("file")
    r.add_argument("--pipeline", help="phase list file")
    r.add_argument("--no-opt", action="store_true", help="skip normalization")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("deriv", help="print the optimized derivative of a program")
    d.add_argument("file")
    d.add_argument("--wrt", required=True)
    d.add_argument("--emit", choices=("ir", "c"), default="ir")
    d.add_argument("--name", default="kernel", help="C function name")
    d.add_argument("--soa", action="store_true", help="emit pair arrays as two arrays")
    d.add_argument("--pipeline")
    d.set_defaults(func=cmd_deriv)

    c = sub.add_parser("check-grad", help="compare AD with central differences")
    c.add_argument("file")
    c.add_argument("--wrt", required=True)
    c.add_argument("--n", type=int, default=8, help="size of generated arrays")
    c.add_argument("--h", type=float, default=1e-6)
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--inputs", help="wire-format file with the arguments")
    c.add_argument("--show", action="store_true", help="print both derivative arrays")
    c.add_argument("--pipeline")
    c.set_defaults(func=cmd_check_grad)

    b = sub.add_parser("bench", help="count operations of a benchmark kernel")
    b.add_argument("kernel")
    b.add_argument("--sizes", default="64,128,256")
    b.add_argument("--json", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except (UsageError, ParseError, FTypeError, UnboundVariable, wire.WireError,
            driver.ProgramError, NotFree, UnsupportedIndependentType, ShapeMismatch) as err:
        print(f"dfsm: {err}", file=sys.stderr)
        return 2
    except (ADError, CodegenError, EvalError, FixpointExceeded) as err:
        print(f"dfsm: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
