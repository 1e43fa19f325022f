"""C emission in destination-passing style.

Array results are written into a caller-supplied bump region (``storage``);
the generated code never calls an allocator.  Arrays are flat: a vector is
``{length, elems}`` and a matrix ``{rows, cols, elems}`` in row-major order.
Temporary arrays created inside a loop body are released at the end of each
iteration by resetting the region's top.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .syntax import (
    Abstraction, Application, Array, BoolLit, BoolT, CardLit, Constant, Expr, Fun, If,
    IndexLit, Let, Num, PairT, ScalarLit, Ty, Variable, CONST_ARITY, DOUBLE, INDEX,
    const_app, spine,
)
from .typecheck import Checker, Template, default_int


class CodegenError(Exception):
    pass


class ResidualHigherOrder(CodegenError):
    def __init__(self, subterm: Expr):
        from .printer import pretty
        super().__init__(f"higher-order term left after optimization: {pretty(subterm)}")
        self.subterm = subterm


class UnsupportedShape(CodegenError):
    def __init__(self, ty, why: str = ""):
        from .printer import show_type
        shown = show_type(ty) if isinstance(ty, Ty) else str(ty)
        super().__init__(f"unsupported shape {shown}" + (f": {why}" if why else ""))
        self.ty = ty


RUNTIME = r"""#include <math.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

typedef struct { char *base; size_t top; size_t cap; } storage_t;
typedef storage_t *storage;

static inline void *dfsm_alloc(storage s, size_t bytes) {
  bytes = (bytes + 15) & ~(size_t)15;
  if (s->top + bytes > s->cap) { fputs("storage exhausted\n", stderr); exit(3); }
  void *p = s->base + s->top;
  s->top += bytes;
  return p;
}

static inline void dfsm_fail(const char *msg) { fputs(msg, stderr); fputc('\n', stderr); exit(4); }

static inline int64_t dfsm_ipow(int64_t a, int64_t b) {
  int64_t r = 1;
  while (b-- > 0) r *= a;
  return r;
}

static inline double dfsm_log(double a) { return a > 0 ? log(a) : (a == 0 ? -INFINITY : NAN); }
static inline double dfsm_sqrt(double a) { return a >= 0 ? sqrt(a) : NAN; }
"""

C_KEYWORDS = {
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch",
    "typedef", "union", "unsigned", "void", "volatile", "while", "main", "s", "res",
    "exp", "log", "sin", "cos", "tan", "sqrt", "pow", "abs", "exit", "dual",
    "vector", "matrix", "vector_d", "matrix_d", "storage", "storage_t",
}


# --------------------------------------------------------------------------- #
# C types

def _is_int(t: Ty) -> bool:
    return isinstance(t, Num) and t != DOUBLE


def _mangle(t: Ty) -> str:
    if t == DOUBLE:
        return "f"
    if _is_int(t):
        return "i"
    if isinstance(t, BoolT):
        return "b"
    if isinstance(t, PairT):
        return f"p{_mangle(t.left)}{_mangle(t.right)}"
    if isinstance(t, Array):
        return f"a{_mangle(t.elem)}"
    raise UnsupportedShape(t)


def is_scalar(t: Ty) -> bool:
    """Values held in a C local: numbers, booleans and pairs of those."""
    if isinstance(t, (Num, BoolT)):
        return True
    if isinstance(t, PairT):
        return is_scalar(t.left) and is_scalar(t.right)
    return False


def array_rank(t: Ty) -> int:
    r = 0
    while isinstance(t, Array):
        t, r = t.elem, r + 1
    if not is_scalar(t):
        raise UnsupportedShape(t, "array elements must be numbers or pairs of numbers")
    return r


def base_elem(t: Ty) -> Ty:
    while isinstance(t, Array):
        t = t.elem
    return t


DUAL = PairT(DOUBLE, DOUBLE)


@dataclass
class Types:
    """Struct declarations needed by one translation unit, in first-use order."""
    decls: dict = field(default_factory=dict)

    def scalar(self, t: Ty) -> str:
        if t == DOUBLE:
            return "double"
        if _is_int(t):
            return "int64_t"
        if isinstance(t, BoolT):
            return "int"
        if isinstance(t, PairT) and is_scalar(t):
            name = "dual" if t == DUAL else f"pair_{_mangle(t)}"
            if name not in self.decls:
                a, b = self.scalar(t.left), self.scalar(t.right)
                self.decls[name] = f"typedef struct {{ {a} fst; {b} snd; }} {name};"
            return name
        raise UnsupportedShape(t)

    def handle(self, t: Ty, soa: bool = False) -> str:
        """Pointer type of an array handle."""
        rank = array_rank(t)
        el = base_elem(t)
        if rank not in (1, 2):
            raise UnsupportedShape(t, "only vectors and matrices are supported")
        split = soa and isinstance(el, PairT)
        if el == DOUBLE:
            name = "vector" if rank == 1 else "matrix"
        elif el == DUAL:
            name = ("vector_d" if rank == 1 else "matrix_d") + ("_soa" if split else "")
        else:
            name = f"arr{rank}_{_mangle(el)}" + ("_soa" if split else "")
        if name not in self.decls:
            dims = "int64_t length;" if rank == 1 else "int64_t rows, cols;"
            if split:
                a, b = self.scalar(el.left), self.scalar(el.right)
                body = f"{dims} {a} *fst; {b} *snd;"
            else:
                body = f"{dims} {self.scalar(el)} *elems;"
            self.decls[name] = f"typedef struct {{ {body} }} {name}_t, *{name};"
        return name


# --------------------------------------------------------------------------- #
# values during emission

@dataclass
class Arr:
    """An array in C: dimension expressions and element storage expression(s).

    ``elems`` is one pointer expression, or a (fst, snd) pair of pointers for
    split pair arrays.
    """
    ty: Ty
    dims: tuple
    elems: object
    fresh: bool = False

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def split(self) -> bool:
        return isinstance(self.elems, tuple)


@dataclass
class Bind:
    ty: Ty
    c: object  # str for scalars, Arr for arrays


def c_double(x: float) -> str:
    if math.isnan(x):
        return "NAN"
    if math.isinf(x):
        return "INFINITY" if x > 0 else "(-INFINITY)"
    s = "%.17g" % x
    if re.fullmatch(r"-?\d+", s):
        s += ".0"
    return f"({s})" if s.startswith("-") else s


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class Emitter:
    def __init__(self, soa: bool = False, types: Optional[Types] = None):
        self.soa = soa
        self.types = types or Types()
        self.checker = Checker()
        self.out: list = []
        self.indent = 1
        self.used: set = set()
        self.allocs = 0

    # -- plumbing
    def line(self, text: str) -> None:
        self.out.append("  " * self.indent + text)

    def fresh(self, hint: str) -> str:
        base = re.sub(r"[^A-Za-z0-9_]", "_", hint.replace("$", "_"))
        if not base or not (base[0].isalpha() or base[0] == "_") or base in C_KEYWORDS \
                or base.startswith("dfsm"):
            base = "v_" + base
        name, k = base, 1
        while name in self.used:
            name = f"{base}_{k}"
            k += 1
        self.used.add(name)
        return name

    def type_of(self, env: dict, e: Expr) -> Ty:
        t = self.checker.synth({k: b.ty for k, b in env.items()}, e)
        if isinstance(t, Template):
            raise ResidualHigherOrder(e)
        return default_int(t) if isinstance(t, Num) else t

    def sub(self, fn):
        """Run ``fn`` with a fresh statement buffer; returns (lines, result)."""
        saved, self.out = self.out, []
        self.indent += 1
        try:
            result = fn()
            return self.out, result
        finally:
            self.out = saved
            self.indent -= 1

    def atom(self, c: str, cty: str, hint: str = "t") -> str:
        if _IDENT.match(c) or re.fullmatch(r"\(?-?[\d.eE+-]+\)?", c):
            return c
        name = self.fresh(hint)
        self.line(f"{cty} {name} = {c};")
        return name

    def alloc(self, count: str, cty: str) -> str:
        self.allocs += 1
        return f"({cty} *)dfsm_alloc(s, (size_t)({count}) * sizeof({cty}))"

    def scoped_loop(self, header: str, body_fn) -> None:
        """Emit a for loop; temporaries allocated by the body are released per iteration."""
        before = self.allocs
        lines, _ = self.sub(body_fn)
        self.line(header + " {")
        if self.allocs != before:
            mark = self.fresh("mark")
            self.out.append("  " * (self.indent + 1) + f"size_t {mark} = s->top;")
            self.out.extend(lines)
            self.out.append("  " * (self.indent + 1) + f"s->top = {mark};")
        else:
            self.out.extend(lines)
        self.line("}")

    # -- scalars
    def scalar(self, e: Expr, env: dict) -> str:
        if isinstance(e, Variable):
            b = env.get(e.name)
            if b is None:
                raise CodegenError(f"unbound variable {e.name!r}")
            if isinstance(b.c, Arr):
                raise UnsupportedShape(b.ty, "array used as a scalar")
            return b.c
        if isinstance(e, ScalarLit):
            return c_double(e.value)
        if isinstance(e, (IndexLit, CardLit)):
            return str(e.value)
        if isinstance(e, BoolLit):
            return "1" if e.value else "0"
        if isinstance(e, Let):
            env2 = self.bind_let(e, env)
            return self.scalar(e.body, env2)
        if isinstance(e, If):
            return self.scalar_if(e, env)
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant):
                if len(args) != CONST_ARITY[head.name]:
                    raise ResidualHigherOrder(e)
                return self.constant(head.name, args, e, env)
        raise ResidualHigherOrder(e)

    def bind_let(self, e: Let, env: dict) -> dict:
        ty = self.type_of(env, e.bound)
        if isinstance(ty, Fun):
            raise ResidualHigherOrder(e.bound)
        if isinstance(ty, Array):
            return {**env, e.binder: Bind(ty, self.array(e.bound, env))}
        if not is_scalar(ty):
            raise UnsupportedShape(ty)
        c = self.scalar(e.bound, env)
        name = self.fresh(e.binder)
        self.line(f"{self.types.scalar(ty)} {name} = {c};")
        return {**env, e.binder: Bind(ty, name)}

    def scalar_if(self, e: If, env: dict) -> str:
        ty = self.type_of(env, e)
        cty = self.types.scalar(ty)
        cond = self.scalar(e.cond, env)
        tl, tc = self.sub(lambda: self.scalar(e.then, env))
        fl, fc = self.sub(lambda: self.scalar(e.orelse, env))
        if not tl and not fl:
            return f"({cond} ? {tc} : {fc})"
        name = self.fresh("t")
        self.line(f"{cty} {name};")
        self.line(f"if ({cond}) {{")
        self.out.extend(tl)
        self.out.append("  " * (self.indent + 1) + f"{name} = {tc};")
        self.line("} else {")
        self.out.extend(fl)
        self.out.append("  " * (self.indent + 1) + f"{name} = {fc};")
        self.line("}")
        return name

    BIN = {"+": "+", "-": "-", "*": "*", "/": "/", ">": ">", "<": "<", "==": "==",
           "<>": "!=", "&&": "&&", "||": "||"}
    UN = {"sin": "sin", "cos": "cos", "tan": "tan", "exp": "exp", "log": "dfsm_log",
          "sqrt": "dfsm_sqrt"}

    def constant(self, name: str, args: list, e: Expr, env: dict) -> str:
        if name in self.BIN:
            a, b = self.scalar(args[0], env), self.scalar(args[1], env)
            return f"({a} {self.BIN[name]} {b})"
        if name == "**":
            a, b = self.scalar(args[0], env), self.scalar(args[1], env)
            if _is_int(self.type_of(env, args[0])) and _is_int(self.type_of(env, args[1])):
                return f"dfsm_ipow({a}, {b})"
            return f"pow({a}, {b})"
        if name == "neg":
            return f"(-{self.scalar(args[0], env)})"
        if name == "!":
            return f"(!{self.scalar(args[0], env)})"
        if name in self.UN:
            return f"{self.UN[name]}({self.scalar(args[0], env)})"
        if name == "pair":
            ty = self.type_of(env, e)
            a, b = self.scalar(args[0], env), self.scalar(args[1], env)
            return f"(({self.types.scalar(ty)}){{{a}, {b}}})"
        if name in ("fst", "snd"):
            p = const_app(args[0], "pair")
            if p is not None:
                return self.scalar(p[0] if name == "fst" else p[1], env)
            g = const_app(args[0], "get")
            if g is not None:
                arr = self.array(g[0], env)
                if arr.rank != 1:
                    raise UnsupportedShape(arr.ty, "row used as a scalar")
                k = self.index(g[1], env)
                if arr.split:
                    return f"{arr.elems[0 if name == 'fst' else 1]}[{k}]"
                return f"{arr.elems}[{k}].{name}"
            return f"({self.scalar(args[0], env)}).{name}"
        if name == "get":
            arr = self.array(args[0], env)
            if arr.rank != 1:
                raise UnsupportedShape(arr.ty, "row used as a scalar")
            k = self.index(args[1], env)
            if arr.split:
                cty = self.types.scalar(arr.ty.elem)
                return f"(({cty}){{{arr.elems[0]}[{k}], {arr.elems[1]}[{k}]}})"
            return f"{arr.elems}[{k}]"
        if name == "length":
            return self.array(args[0], env).dims[0]
        if name == "ifold":
            return self.ifold(args, env)
        if name == "build":
            raise UnsupportedShape(self.type_of(env, e), "array in scalar position")
        raise ResidualHigherOrder(e)

    def index(self, e: Expr, env: dict) -> str:
        return self.atom(self.scalar(e, env), "int64_t", "k")

    def ifold(self, args: list, env: dict) -> str:
        f, z, n = args
        if not (isinstance(f, Abstraction) and isinstance(f.body, Abstraction)):
            raise ResidualHigherOrder(f)
        ty = self.type_of(env, z)
        if not is_scalar(ty):
            raise UnsupportedShape(ty, "fold state must be scalar")
        cty = self.types.scalar(ty)
        acc = self.fresh(f.param)
        self.line(f"{cty} {acc} = {self.scalar(z, env)};")
        bound = self.atom(self.scalar(n, env), "int64_t", "n")
        i = self.fresh(f.body.param)
        env2 = {**env, f.param: Bind(ty, acc), f.body.param: Bind(INDEX, i)}

        def body():
            c = self.scalar(f.body.body, env2)
            self.line(f"{acc} = {c};")
        self.scoped_loop(f"for (int64_t {i} = 0; {i} < {bound}; {i}++)", body)
        return acc

    # -- arrays
    def array(self, e: Expr, env: dict) -> Arr:
        if isinstance(e, Variable):
            b = env.get(e.name)
            if b is None or not isinstance(b.c, Arr):
                raise CodegenError(f"{e.name!r} is not an array here")
            return b.c
        if isinstance(e, Let):
            return self.array(e.body, self.bind_let(e, env))
        if isinstance(e, If):
            return self.array_if(e, env)
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant) and len(args) == CONST_ARITY[head.name]:
                if head.name == "get":
                    m = self.array(args[0], env)
                    if m.rank != 2:
                        raise UnsupportedShape(m.ty)
                    k = self.index(args[1], env)
                    if m.split:
                        els = tuple(f"({p} + ({k}) * {m.dims[1]})" for p in m.elems)
                    else:
                        els = f"({m.elems} + ({k}) * {m.dims[1]})"
                    return Arr(m.ty.elem, (m.dims[1],), els)
                if head.name == "build":
                    return self.build(args, env, self.type_of(env, e))
                if head.name in ("fst", "snd"):
                    p = const_app(args[0], "pair")
                    if p is not None:
                        return self.array(p[0] if head.name == "fst" else p[1], env)
                    raise UnsupportedShape(self.type_of(env, args[0]), "pair of arrays")
        if isinstance(e, (Abstraction, Application, Constant)):
            raise ResidualHigherOrder(e)
        raise UnsupportedShape(self.type_of(env, e))

    def new_storage(self, ty: Ty, dims: tuple) -> object:
        el = base_elem(ty)
        count = " * ".join(dims)
        if self.soa and isinstance(el, PairT):
            a = self.fresh("buf")
            b = self.fresh("buf")
            self.line(f"{self.types.scalar(el.left)} *{a} = {self.alloc(count, self.types.scalar(el.left))};")
            self.line(f"{self.types.scalar(el.right)} *{b} = {self.alloc(count, self.types.scalar(el.right))};")
            return (a, b)
        cty = self.types.scalar(el)
        buf = self.fresh("buf")
        self.line(f"{cty} *{buf} = {self.alloc(count, cty)};")
        return buf

    def store(self, elems, pos: str, body: Expr, env: dict) -> None:
        if isinstance(elems, tuple):
            p = const_app(body, "pair")
            if p is not None:
                self.line(f"{elems[0]}[{pos}] = {self.scalar(p[0], env)};")
                self.line(f"{elems[1]}[{pos}] = {self.scalar(p[1], env)};")
                return
            v = self.atom(self.scalar(body, env), self.types.scalar(self.type_of(env, body)), "e")
            self.line(f"{elems[0]}[{pos}] = {v}.fst;")
            self.line(f"{elems[1]}[{pos}] = {v}.snd;")
            return
        self.line(f"{elems}[{pos}] = {self.scalar(body, env)};")

    def build(self, args: list, env: dict, ty: Ty) -> Arr:
        n, f = args
        if not isinstance(f, Abstraction):
            raise ResidualHigherOrder(f)
        rank = array_rank(ty)
        rows = self.atom(self.scalar(n, env), "int64_t", "n")
        i = self.fresh(f.param)
        env_i = {**env, f.param: Bind(INDEX, i)}
        if rank == 1:
            buf = self.new_storage(ty, (rows,))
            self.scoped_loop(f"for (int64_t {i} = 0; {i} < {rows}; {i}++)",
                             lambda: self.store(buf, i, f.body, env_i))
            return Arr(ty, (rows,), buf, fresh=True)
        if rank != 2:
            raise UnsupportedShape(ty)
        inner = const_app(f.body, "build")
        if inner is not None and f.param not in inner[0].fv_set and isinstance(inner[1], Abstraction):
            # rows are builds of a loop-invariant length: write in place
            cols = self.atom(self.scalar(inner[0], env), "int64_t", "m")
            buf = self.new_storage(ty, (rows, cols))
            g = inner[1]

            def row():
                j = self.fresh(g.param)
                env_j = {**env_i, g.param: Bind(INDEX, j)}
                self.scoped_loop(f"for (int64_t {j} = 0; {j} < {cols}; {j}++)",
                                 lambda: self.store(buf, f"{i} * {cols} + {j}", g.body, env_j))
            self.scoped_loop(f"for (int64_t {i} = 0; {i} < {rows}; {i}++)", row)
            return Arr(ty, (rows, cols), buf, fresh=True)
        # general rows: the width is taken from row 0, every row is checked
        cols = self.fresh("m")
        self.line(f"int64_t {cols} = 0;")
        before = self.allocs

        def probe():
            self.line(f"int64_t {i} = 0;")
            r = self.array(f.body, env_i)
            self.line(f"{cols} = {r.dims[0]};")
        lines, _ = self.sub(probe)
        self.line(f"if ({rows} > 0) {{")
        if self.allocs != before:
            mark = self.fresh("mark")
            self.out.append("  " * (self.indent + 1) + f"size_t {mark} = s->top;")
            self.out.extend(lines)
            self.out.append("  " * (self.indent + 1) + f"s->top = {mark};")
        else:
            self.out.extend(lines)
        self.line("}")
        buf = self.new_storage(ty, (rows, cols))

        def copy_row():
            r = self.array(f.body, env_i)
            self.line(f'if ({r.dims[0]} != {cols}) dfsm_fail("ragged matrix");')
            j = self.fresh("j")
            self.line(f"for (int64_t {j} = 0; {j} < {cols}; {j}++) {{")
            self.copy_elem(buf, f"{i} * {cols} + {j}", r.elems, j)
            self.line("}")
        self.scoped_loop(f"for (int64_t {i} = 0; {i} < {rows}; {i}++)", copy_row)
        return Arr(ty, (rows, cols), buf, fresh=True)

    def copy_elem(self, dst, dpos: str, src, spos: str) -> None:
        pad = "  " * (self.indent + 1)
        if isinstance(dst, tuple) and isinstance(src, tuple):
            self.out.append(pad + f"{dst[0]}[{dpos}] = {src[0]}[{spos}]; {dst[1]}[{dpos}] = {src[1]}[{spos}];")
        elif isinstance(dst, tuple):
            self.out.append(pad + f"{dst[0]}[{dpos}] = {src}[{spos}].fst; {dst[1]}[{dpos}] = {src}[{spos}].snd;")
        elif isinstance(src, tuple):
            self.out.append(pad + f"{dst}[{dpos}].fst = {src[0]}[{spos}]; {dst}[{dpos}].snd = {src[1]}[{spos}];")
        else:
            self.out.append(pad + f"{dst}[{dpos}] = {src}[{spos}];")

    def array_if(self, e: If, env: dict) -> Arr:
        ty = self.type_of(env, e)
        rank = array_rank(ty)
        cond = self.scalar(e.cond, env)
        dims = [self.fresh("d") for _ in range(rank)]
        el = base_elem(ty)
        split = self.soa and isinstance(el, PairT)
        ptrs = [self.fresh("p") for _ in range(2 if split else 1)]
        ctys = [self.types.scalar(el.left), self.types.scalar(el.right)] if split else [self.types.scalar(el)]
        for d in dims:
            self.line(f"int64_t {d};")
        for p, c in zip(ptrs, ctys):
            self.line(f"{c} *{p};")

        def branch(x):
            def go():
                r = self.array(x, env)
                for d, v in zip(dims, r.dims):
                    self.line(f"{d} = {v};")
                if split and not r.split:
                    raise UnsupportedShape(ty, "mixed pair-array layouts")
                srcs = r.elems if r.split else (r.elems,)
                for p, v in zip(ptrs, srcs):
                    self.line(f"{p} = {v};")
            return go
        tl, _ = self.sub(branch(e.then))
        fl, _ = self.sub(branch(e.orelse))
        self.line(f"if ({cond}) {{")
        self.out.extend(tl)
        self.line("} else {")
        self.out.extend(fl)
        self.line("}")
        return Arr(ty, tuple(dims), tuple(ptrs) if split else ptrs[0])

    # -- results
    def result(self, r: Arr) -> str:
        handle = self.types.handle(r.ty, self.soa)
        if not r.fresh:
            # results never alias inputs: copy into the destination region
            dims = r.dims
            buf = self.new_storage(r.ty, dims)
            count = " * ".join(dims)
            j = self.fresh("j")
            self.line(f"for (int64_t {j} = 0; {j} < {count}; {j}++) {{")
            self.copy_elem(buf, j, r.elems, j)
            self.line("}")
            r = Arr(r.ty, dims, buf, fresh=True)
        self.allocs += 1
        self.line(f"{handle} res = ({handle})dfsm_alloc(s, sizeof({handle}_t));")
        if r.rank == 1:
            self.line(f"res->length = {r.dims[0]};")
        else:
            self.line(f"res->rows = {r.dims[0]};")
            self.line(f"res->cols = {r.dims[1]};")
        if r.split:
            self.line(f"res->fst = {r.elems[0]};")
            self.line(f"res->snd = {r.elems[1]};")
        else:
            self.line(f"res->elems = {r.elems};")
        return "res"


# --------------------------------------------------------------------------- #
# entry points

@dataclass
class CTarget:
    name: str
    params: list            # (name, Ty)
    result: Ty
    source: str
    uses_storage: bool
    soa: bool = False
    types: Types = field(default_factory=Types)


def _params(e: Expr) -> tuple:
    params = []
    while isinstance(e, Abstraction):
        if e.ty is None:
            raise UnsupportedShape("?", f"parameter {e.param!r} needs a type annotation")
        if isinstance(e.ty, Fun):
            raise ResidualHigherOrder(e)
        params.append((e.param, e.ty))
        e = e.body
    return params, e


def compile_function(name: str, e: Expr, soa: bool = False, types: Optional[Types] = None) -> CTarget:
    if not _IDENT.match(name) or name in C_KEYWORDS:
        raise CodegenError(f"invalid C function name {name!r}")
    em = Emitter(soa, types)
    em.used |= {name}
    params, body = _params(e)
    env = {}
    cparams = []
    for p, ty in params:
        c = em.fresh(p)
        if isinstance(ty, Array):
            handle = em.types.handle(ty)
            rank = array_rank(ty)
            dims = (f"{c}->length",) if rank == 1 else (f"{c}->rows", f"{c}->cols")
            env[p] = Bind(ty, Arr(ty, dims, f"{c}->elems"))
            cparams.append(f"{handle} {c}")
        elif is_scalar(ty):
            env[p] = Bind(ty, c)
            cparams.append(f"{em.types.scalar(ty)} {c}")
        else:
            raise UnsupportedShape(ty)
    rty = em.type_of(env, body)
    if isinstance(rty, Fun):
        raise ResidualHigherOrder(body)
    if isinstance(rty, Array):
        ret = em.types.handle(rty, soa)
        value = em.result(em.array(body, env))
    elif is_scalar(rty):
        ret = em.types.scalar(rty)
        value = em.scalar(body, env)
    else:
        raise UnsupportedShape(rty)
    storage = em.allocs > 0
    if storage:
        cparams.insert(0, "storage s")
    lines = [f"{ret} {name}({', '.join(cparams) or 'void'}) {{"]
    lines += em.out
    lines.append(f"  return {value};")
    lines.append("}")
    return CTarget(name, params, rty, "\n".join(lines) + "\n", storage, soa, em.types)


def emit_c(name: str, e: Expr, soa: bool = False) -> str:
    """A standalone C translation unit defining ``name``."""
    t = compile_function(name, e, soa)
    return _unit([t], t.types)


def _unit(targets: list, types: Types) -> str:
    parts = [RUNTIME]
    if types.decls:
        parts.append("\n".join(types.decls.values()) + "\n")
    parts.extend(t.source for t in targets)
    return "\n".join(parts)


# --------------------------------------------------------------------------- #
# harness

HARNESS_RUNTIME = r"""
static char dfsm_arena[DFSM_ARENA_BYTES];
static char dfsm_inputs[DFSM_ARENA_BYTES];
static storage_t dfsm_in = { dfsm_inputs, 0, DFSM_ARENA_BYTES };

static inline int read_int(int64_t *x) { long long v; if (scanf("%lld", &v) != 1) return 0; *x = v; return 1; }
static inline int read_double(double *x) { return scanf("%lf", x) == 1; }
static inline void bad_input(void) { fputs("malformed input\n", stderr); exit(2); }
static inline void put_double(double x) { printf(" %.17g", x); }
static inline void put_int(int64_t x) { printf(" %lld", (long long)x); }
"""


def _reader(types: Types, ty: Ty, target: str, out: list, first: bool) -> None:
    """Statements reading a value of ``ty`` into the existing lvalue ``target``."""
    fail = "{ if (first) return 0; bad_input(); }" if first else "bad_input();"
    if ty == DOUBLE:
        out.append(f"  if (!read_double(&{target})) {fail}")
    elif _is_int(ty) or isinstance(ty, BoolT):
        tmp = f"tmp_{len(out)}"
        out.append(f"  int64_t {tmp}; if (!read_int(&{tmp})) {fail}")
        out.append(f"  {target} = {tmp};")
    elif isinstance(ty, PairT):
        _reader(types, ty.left, f"{target}.fst", out, first)
        _reader(types, ty.right, f"{target}.snd", out, False)
    else:
        raise UnsupportedShape(ty)


def _read_array(types: Types, ty: Ty, var: str, out: list, first: bool) -> None:
    handle = types.handle(ty)
    rank = array_rank(ty)
    el = base_elem(ty)
    cty = types.scalar(el)
    fail = "{ if (first) return 0; bad_input(); }" if first else "bad_input();"
    out.append(f"  {handle} {var} = ({handle})dfsm_alloc(&dfsm_in, sizeof({handle}_t));")
    if rank == 1:
        out.append(f"  if (!read_int(&{var}->length) || {var}->length < 0) {fail}")
        count = f"{var}->length"
    else:
        out.append(f"  if (!read_int(&{var}->rows) || {var}->rows < 0) {fail}")
        out.append(f"  if (!read_int(&{var}->cols) || {var}->cols < 0) bad_input();")
        count = f"{var}->rows * {var}->cols"
    out.append(f"  {var}->elems = ({cty} *)dfsm_alloc(&dfsm_in, (size_t)({count}) * sizeof({cty}));")
    out.append(f"  for (int64_t q = 0; q < {count}; q++) {{")
    inner = []
    _reader(types, el, f"{var}->elems[q]", inner, False)
    out.extend("  " + x for x in inner)
    out.append("  }")


def _printer(types: Types, ty: Ty, value: str, out: list, soa: bool) -> None:
    if ty == DOUBLE:
        out.append(f"  put_double({value});")
    elif _is_int(ty) or isinstance(ty, BoolT):
        out.append(f"  put_int({value});")
    elif isinstance(ty, PairT):
        _printer(types, ty.left, f"({value}).fst", out, soa)
        _printer(types, ty.right, f"({value}).snd", out, soa)
    elif isinstance(ty, Array):
        rank = array_rank(ty)
        el = base_elem(ty)
        split = soa and isinstance(el, PairT)
        if rank == 1:
            out.append(f"  put_int({value}->length);")
            count = f"{value}->length"
        else:
            out.append(f"  put_int({value}->rows); put_int({value}->cols);")
            count = f"{value}->rows * {value}->cols"
        out.append(f"  for (int64_t q = 0; q < {count}; q++) {{")
        inner = []
        if split:
            _printer(types, el.left, f"{value}->fst[q]", inner, soa)
            _printer(types, el.right, f"{value}->snd[q]", inner, soa)
        else:
            _printer(types, el, f"{value}->elems[q]", inner, soa)
        out.extend("  " + x for x in inner)
        out.append("  }")
    else:
        raise UnsupportedShape(ty)


def emit_harness(kernels: list, arena_bytes: int = 1 << 26) -> str:
    """A complete program: the kernels plus a main() speaking the wire format.

    Input records are read until end of input; for each record every kernel
    reads its arguments in order, runs, and prints one output line.
    """
    if not kernels:
        raise CodegenError("no kernels")
    types = kernels[0].types
    for k in kernels[1:]:
        for name, decl in k.types.decls.items():
            types.decls.setdefault(name, decl)
    parts = [_unit(kernels, types).replace("#include <stdlib.h>\n",
                                           f"#include <stdlib.h>\n#define DFSM_ARENA_BYTES {arena_bytes}\n", 1),
             HARNESS_RUNTIME]
    for k in kernels:
        lines = [f"static int run_{k.name}(int first) {{"]
        args = []
        for idx, (p, ty) in enumerate(k.params):
            var = f"in{idx}"
            if isinstance(ty, Array):
                _read_array(types, ty, var, lines, first=idx == 0)
            else:
                lines.append(f"  {types.scalar(ty)} {var};")
                _reader(types, ty, var, lines, first=idx == 0)
            args.append(var)
        if k.uses_storage:
            lines.append("  storage_t st = { dfsm_arena, 0, DFSM_ARENA_BYTES };")
            args.insert(0, "&st")
        rty = k.result
        if isinstance(rty, Array):
            decl = types.handle(rty, k.soa)
        else:
            decl = types.scalar(rty)
        lines.append(f"  {decl} out = {k.name}({', '.join(args)});")
        _printer(types, rty, "out", lines, k.soa)
        lines.append('  putchar(\'\\n\');')
        lines.append("  return 1;")
        lines.append("}")
        parts.append("\n".join(lines) + "\n")
    if not kernels[0].params:
        calls = [f"  run_{k.name}({int(n == 0)});" for n, k in enumerate(kernels)]
        parts.append("int main(void) {\n" + "\n".join(calls) + "\n  return 0;\n}\n")
        return "\n".join(parts)
    main = ["int main(void) {", "  for (;;) {", "    dfsm_in.top = 0;"]
    for n, k in enumerate(kernels):
        if n == 0:
            main.append(f"    if (!run_{k.name}(1)) break;")
        else:
            main.append(f"    run_{k.name}(0);")
    main += ["  }", "  return 0;", "}"]
    parts.append("\n".join(main) + "\n")
    return "\n".join(parts)
