"""Glue between parsing, expansion, optimization, evaluation and the C toolchain."""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from typing import Optional

from .ad import NotFree, UnsupportedIndependentType, expand
from .codegen import compile_function, emit_harness
from .opt.pipeline import Pipeline, normalize
from .parser import parse
from .syntax import (
    Abstraction, Array, BoolT, Expr, Let, Macro, Num, PairT, Ty, Variable, DOUBLE,
    const, fresh_name, all_names,
)
from .typecheck import typecheck


class ProgramError(Exception):
    """The program text is not a function the tools can work with."""


def signature(e: Expr) -> tuple[list, Expr]:
    """Annotated parameters (name, type) of a top-level function and its body."""
    params = []
    while isinstance(e, Abstraction):
        if e.ty is None:
            raise ProgramError(f"parameter {e.param!r} needs a type annotation")
        params.append((e.param, e.ty))
        e = e.body
    return params, e


def rebuild(params: list, body: Expr) -> Expr:
    for name, ty in reversed(params):
        body = Abstraction(name, body, ty)
    return body


def load(source: str) -> Expr:
    e = parse(source)
    typecheck({}, e)
    return e


def prepare(e: Expr, optimize: bool = True, pipeline: Optional[Pipeline] = None) -> Expr:
    """Expand derivative constructs and, optionally, normalize the whole program."""
    out = expand(e, {}, optimize=optimize, pipeline=pipeline)
    return normalize(out, pipeline) if optimize else out


def _project(e: Expr, ty: Ty, avoid: set) -> Expr:
    """Tangent part of ``e``, a dual value whose primal has type ``ty``."""
    if isinstance(ty, Num):
        return const("snd", e)
    if isinstance(ty, BoolT):
        return e
    if isinstance(ty, PairT):
        return const("pair", _project(const("fst", e), ty.left, avoid),
                     _project(const("snd", e), ty.right, avoid))
    if isinstance(ty, Array):
        i = fresh_name("i", avoid)
        avoid.add(i)
        body = _project(const("get", e, Variable(i)), ty.elem, avoid)
        return const("build", const("length", e), Abstraction(i, body))
    raise ProgramError("cannot take the tangent of a function")


def derivative(e: Expr, wrt: str) -> Expr:
    """``fun params -> tangent of (deriv body wrt)`` for a top-level function.

    For a vector or matrix ``wrt`` the outer index (or indices) range over
    the components of ``wrt``.
    """
    params, body = signature(e)
    types = dict(params)
    if wrt not in types:
        raise NotFree(wrt)
    xty = types[wrt]
    out_ty = typecheck(types, body)
    avoid = all_names(e) | {wrt}
    r = fresh_name("r", avoid)
    avoid.add(r)
    wrapped = out_ty
    if xty == DOUBLE:
        pass
    elif xty == Array(DOUBLE):
        wrapped = Array(out_ty)
    elif xty == Array(Array(DOUBLE)):
        wrapped = Array(Array(out_ty))
    else:
        raise UnsupportedIndependentType(xty)
    proj = _project(Variable(r), wrapped, avoid) if xty == DOUBLE else \
        _project_outer(Variable(r), xty, out_ty, avoid)
    return rebuild(params, Let(r, Macro("deriv", (body, Variable(wrt))), proj))


def _project_outer(e: Expr, xty: Ty, out_ty: Ty, avoid: set) -> Expr:
    if not isinstance(xty, Array):
        return _project(e, out_ty, avoid)
    i = fresh_name("i", avoid)
    avoid.add(i)
    body = _project_outer(const("get", e, Variable(i)), xty.elem, out_ty, avoid)
    return const("build", const("length", e), Abstraction(i, body))


def dual_derivative(e: Expr, wrt: str) -> Expr:
    """``fun params -> deriv body wrt``: values and tangents together."""
    params, body = signature(e)
    if wrt not in dict(params):
        raise NotFree(wrt)
    return rebuild(params, Macro("deriv", (body, Variable(wrt))))


def derivative_program(e: Expr, wrt: str, optimize: bool = True,
                       pipeline: Optional[Pipeline] = None) -> Expr:
    return prepare(derivative(e, wrt), optimize, pipeline)


# --------------------------------------------------------------------------- #
# C toolchain

def gcc_path() -> Optional[str]:
    return shutil.which(os.environ.get("CC", "gcc"))


class CompileError(Exception):
    pass


def build_harness(kernels: list, workdir: Optional[str] = None, soa: bool = False) -> str:
    """Compile named optimized functions into one harness binary; returns its path.

    ``kernels`` is a list of (name, Expr).
    """
    cc = gcc_path()
    if cc is None:
        raise CompileError("no C compiler found")
    targets = []
    for name, e in kernels:
        targets.append(compile_function(name, e, soa, targets[0].types if targets else None))
    source = emit_harness(targets)
    workdir = workdir or tempfile.mkdtemp(prefix="dfsm-")
    os.makedirs(workdir, exist_ok=True)
    src = os.path.join(workdir, "harness.c")
    exe = os.path.join(workdir, "harness")
    with open(src, "w") as fh:
        fh.write(source)
    proc = subprocess.run([cc, "-O2", "-std=c99", "-ffp-contract=off", "-o", exe, src, "-lm"],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise CompileError(proc.stderr)
    return exe


def run_harness(exe: str, text: str, timeout: float = 60) -> str:
    proc = subprocess.run([exe], input=text, capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        raise CompileError(f"harness exited with {proc.returncode}: {proc.stderr.strip()}")
    return proc.stdout
