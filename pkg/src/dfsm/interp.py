"""Call-by-value evaluator.

Terms are compiled once into nested Python closures over tuple environments
and then run.  Values are plain Python data: float for Double, int for Index
and Card, bool, list for arrays, tuple for pairs, and ``Closure`` for
functions.  Counting instrumentation is compiled in only when requested, so
plain evaluation pays nothing for it.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .syntax import (
    Abstraction, Application, BoolLit, CardLit, Constant, Expr, If, IndexLit, Let,
    Macro, ScalarLit, Variable, CONST_ARITY, SCALAR_CONSTS, eta_expand_const, spine,
)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


class EvalError(Exception):
    pass


class IndexOutOfBounds(EvalError):
    def __init__(self, index: int, length: int):
        super().__init__(f"index {index} out of bounds for length {length}")
        self.index = index
        self.length = length


class UnboundVariable(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


@dataclass
class Counters:
    scalar_ops: int = 0
    array_allocs: int = 0
    elem_writes: int = 0


class Closure:
    """A compiled lambda with the values of its free variables."""
    __slots__ = ("body", "captured", "param")

    def __init__(self, body: Callable, captured: tuple, param: str = "_"):
        self.body = body
        self.captured = captured
        self.param = param

    def __call__(self, arg):
        return self.body(self.captured + (arg,))

    def __repr__(self) -> str:
        return f"<closure {self.param}>"


# --------------------------------------------------------------------------- #
# IEEE-safe scalar operations

def _add(a, b):
    return a + b


def _sub(a, b):
    r = a - b
    if r < 0 and type(r) is int:
        raise IndexOutOfBounds(r, 0)
    return r


def _mul(a, b):
    return a * b


def _div(a, b):
    if type(a) is int and type(b) is int:
        if b == 0:
            raise EvalError("integer division by zero")
        return a // b
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _pow(a, b):
    if type(a) is int and type(b) is int:
        if b < 0:
            raise EvalError("negative integer exponent")
        return a ** b
    try:
        return math.pow(a, b)
    except OverflowError:
        if a < 0 and float(b).is_integer() and int(b) % 2 == 1:
            return -math.inf
        return math.inf
    except ValueError:
        if a == 0 and b < 0:
            odd = float(b).is_integer() and int(b) % 2 == 1
            return math.copysign(math.inf, a) if odd else math.inf
        return math.nan


def _unary(fn):
    def safe(a):
        try:
            return fn(a)
        except OverflowError:
            return math.inf
        except ValueError:
            return math.nan
    return safe


def _log(a):
    if a > 0:
        return math.log(a)
    if a == 0:
        return -math.inf
    return math.nan


def _sqrt(a):
    return math.sqrt(a) if a >= 0 else math.nan


def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


BINARY = {
    "+": _add, "-": _sub, "*": _mul, "/": _div, "**": _pow,
    ">": lambda a, b: a > b, "<": lambda a, b: a < b,
    "==": lambda a, b: a == b, "<>": lambda a, b: a != b,
    "&&": lambda a, b: a and b, "||": lambda a, b: a or b,
}

UNARY = {
    "neg": lambda a: -a,
    "sin": _unary(math.sin), "cos": _unary(math.cos), "tan": _unary(math.tan),
    "log": _log, "exp": _exp, "sqrt": _sqrt,
    "!": lambda a: not a,
    "fst": lambda p: p[0], "snd": lambda p: p[1],
    "length": len,
}


def _get(a, i):
    if i < 0 or i >= len(a):
        raise IndexOutOfBounds(i, len(a))
    return a[i]


# --------------------------------------------------------------------------- #
# compiler

class Compiler:
    def __init__(self, globals_: dict, counters: Optional[Counters]):
        self.globals = globals_
        self.counters = counters

    def comp(self, e: Expr, scope: dict, size: int) -> Callable:
        if isinstance(e, Variable):
            k = scope.get(e.name)
            if k is not None:
                return lambda env: env[k]
            if e.name in self.globals:
                v = self.globals[e.name]
                return lambda env: v
            raise UnboundVariable(e.name)
        if isinstance(e, ScalarLit):
            v = float(e.value)
            return lambda env: v
        if isinstance(e, (IndexLit, CardLit)):
            v = int(e.value)
            return lambda env: v
        if isinstance(e, BoolLit):
            v = bool(e.value)
            return lambda env: v
        if isinstance(e, Let):
            fb = self.comp(e.bound, scope, size)
            fbody = self.comp(e.body, {**scope, e.binder: size}, size + 1)
            return lambda env: fbody(env + (fb(env),))
        if isinstance(e, If):
            fc = self.comp(e.cond, scope, size)
            ft = self.comp(e.then, scope, size)
            fe = self.comp(e.orelse, scope, size)
            return lambda env: ft(env) if fc(env) else fe(env)
        if isinstance(e, Abstraction):
            return self.lambda_(e, scope)
        if isinstance(e, Constant):
            return self.comp(eta_expand_const(e.name), scope, size)
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant) and len(args) >= CONST_ARITY[head.name]:
                k = CONST_ARITY[head.name]
                f = self.constant(head.name, args[:k], scope, size)
                for a in args[k:]:
                    f = self._apply(f, self.comp(a, scope, size))
                return f
            return self._apply(self.comp(e.fun, scope, size), self.comp(e.arg, scope, size))
        if isinstance(e, Macro):
            raise EvalError(f"unexpanded {e.kind} construct; expand derivatives before evaluating")
        raise EvalError(f"cannot evaluate {e!r}")

    @staticmethod
    def _apply(ff: Callable, fa: Callable) -> Callable:
        return lambda env: ff(env)(fa(env))

    def lambda_(self, e: Abstraction, scope: dict) -> Callable:
        fvs = [v for v in e.fvs if v in scope]
        idx = tuple(scope[v] for v in fvs)
        inner = {v: k for k, v in enumerate(fvs)}
        inner[e.param] = len(fvs)
        body = self.comp(e.body, inner, len(fvs) + 1)
        param = e.param
        if not idx:
            return lambda env: Closure(body, (), param)
        return lambda env: Closure(body, tuple(env[k] for k in idx), param)

    def _loop_body(self, f: Expr, nparams: int, scope: dict, size: int) -> Optional[Callable]:
        """Compile ``fun p1 .. pn -> body`` inline, or None if f is not such a lambda."""
        params = []
        t = f
        while len(params) < nparams and isinstance(t, Abstraction):
            params.append(t.param)
            t = t.body
        if len(params) < nparams:
            return None
        inner = dict(scope)
        for k, p in enumerate(params):
            inner[p] = size + k
        return self.comp(t, inner, size + nparams)

    def constant(self, name: str, args: list, scope: dict, size: int) -> Callable:
        ctr = self.counters
        if name == "build":
            fn = self.comp(args[0], scope, size)
            body = self._loop_body(args[1], 1, scope, size)
            if body is not None:
                def build(env):
                    n = fn(env)
                    out = [body(env + (i,)) for i in range(n)]
                    if ctr is not None:
                        ctr.array_allocs += 1
                        ctr.elem_writes += n
                    return out
                return build
            ff = self.comp(args[1], scope, size)

            def build_closure(env):
                n = fn(env)
                f = ff(env)
                out = [f(i) for i in range(n)]
                if ctr is not None:
                    ctr.array_allocs += 1
                    ctr.elem_writes += n
                return out
            return build_closure
        if name == "ifold":
            fz = self.comp(args[1], scope, size)
            fn = self.comp(args[2], scope, size)
            body = self._loop_body(args[0], 2, scope, size)
            if body is not None:
                def ifold(env):
                    acc = fz(env)
                    for i in range(fn(env)):
                        acc = body(env + (acc, i))
                    return acc
                return ifold
            ff = self.comp(args[0], scope, size)

            def ifold_closure(env):
                f = ff(env)
                acc = fz(env)
                for i in range(fn(env)):
                    acc = f(acc)(i)
                return acc
            return ifold_closure
        if name == "get":
            fa = self.comp(args[0], scope, size)
            fi = self.comp(args[1], scope, size)
            return lambda env: _get(fa(env), fi(env))
        if name == "pair":
            fa = self.comp(args[0], scope, size)
            fb = self.comp(args[1], scope, size)
            return lambda env: (fa(env), fb(env))
        counted = ctr is not None and name in SCALAR_CONSTS
        if name in BINARY:
            op = BINARY[name]
            fa = self.comp(args[0], scope, size)
            fb = self.comp(args[1], scope, size)
            if counted:
                def binop(env):
                    ctr.scalar_ops += 1
                    return op(fa(env), fb(env))
                return binop
            return lambda env: op(fa(env), fb(env))
        op1 = UNARY[name]
        fa = self.comp(args[0], scope, size)
        if counted:
            def unop(env):
                ctr.scalar_ops += 1
                return op1(fa(env))
            return unop
        return lambda env: op1(fa(env))


def _globals(e: Expr, env: Optional[dict]) -> tuple[Expr, dict]:
    from .prelude import definitions, with_prelude
    env = dict(env or {})
    defs = definitions()
    if any(v not in env and v in defs for v in e.fvs):
        e = with_prelude(e)
    return e, env


def compile_expr(e: Expr, env: Optional[dict] = None,
                 counters: Optional[Counters] = None) -> Callable[[], Any]:
    """Compile ``e`` to a thunk.  Free names come from ``env`` or the prelude."""
    e, env = _globals(e, env)
    f = Compiler(env, counters).comp(e, {}, 0)
    return lambda: f(())


def evaluate(e: Expr, env: Optional[dict] = None) -> Any:
    return compile_expr(e, env)()


def eval_counted(e: Expr, env: Optional[dict] = None) -> tuple[Any, Counters]:
    c = Counters()
    v = compile_expr(e, env, c)()
    return v, c


def apply_value(f: Any, *args: Any) -> Any:
    for a in args:
        f = f(a)
    return f
