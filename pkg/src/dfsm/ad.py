"""Forward-mode differentiation by source transformation.

``transform`` maps a term to its dual-number counterpart: every variable
``x`` becomes ``d$x`` and every number-typed subterm becomes a pair of
(primal, tangent).  ``expand`` replaces the ``deriv`` construct and the
higher-level ``diff``/``grad``/... forms by applications of transformed
functions to seeded inputs, innermost first, optionally normalizing each
expansion before the enclosing one is processed.
"""

from __future__ import annotations

from typing import Callable, Optional

from . import prelude
from .syntax import (
    Abstraction, Application, Array, BoolLit, BoolT, CardLit, Constant, Expr, Fun,
    If, IndexLit, Let, Macro, Num, PairT, ScalarLit, Ty, Variable,
    COMPARE, CONST_ARITY, DOUBLE, INDEX, LOGIC, MATRIX, RESERVED, VECTOR,
    all_names, app, binders, const, eta_expand_const, fresh_name, fst, lam, lit,
    pair, snd, spine, uniquify,
)
from .typecheck import Checker, Template, TypeError, default_int, dual_type


class ADError(Exception):
    pass


class NotFree(ADError):
    def __init__(self, name: str):
        super().__init__(f"independent variable {name!r} is not bound where it is used")
        self.name = name


class UnsupportedIndependentType(ADError):
    def __init__(self, ty):
        super().__init__(f"cannot differentiate with respect to a value of type {ty}")
        self.ty = ty


class UnsupportedConstant(ADError):
    def __init__(self, name: str):
        super().__init__(f"no derivative rule for constant {name!r}")
        self.name = name


class ReservedName(ADError):
    def __init__(self, name: str):
        super().__init__(f"{name!r} is reserved for derivative expansion and cannot be bound")
        self.name = name


DUAL_PREFIX = "d$"


def dual_name(x: str) -> str:
    return DUAL_PREFIX + x


def zero_lit(e: Expr) -> Expr:
    """Zero literal of the same numeric kind as the literal ``e``."""
    if isinstance(e, IndexLit):
        return IndexLit(0)
    if isinstance(e, CardLit):
        return CardLit(0)
    return ScalarLit(0.0)


def _atomic(e: Expr) -> bool:
    if isinstance(e, (Variable, ScalarLit, IndexLit, CardLit, BoolLit)):
        return True
    head, args = spine(e)
    if isinstance(head, Constant):
        if head.name == "pair" and len(args) == 2:
            return all(_atomic(a) for a in args)
        if head.name in ("fst", "snd") and len(args) == 1:
            return _atomic(args[0])
    return False


# --------------------------------------------------------------------------- #
# the term transform

class _Transform:
    def __init__(self, e: Expr):
        self.used = {dual_name(n) for n in all_names(e)}

    def fresh(self, hint: str) -> str:
        n = fresh_name(hint, self.used)
        self.used.add(n)
        return n

    def d(self, e: Expr) -> Expr:
        if isinstance(e, Variable):
            return Variable(dual_name(e.name))
        if isinstance(e, (ScalarLit, IndexLit, CardLit)):
            return pair(e, zero_lit(e))
        if isinstance(e, BoolLit):
            return e
        if isinstance(e, Abstraction):
            ty = dual_type(e.ty) if e.ty is not None else None
            return Abstraction(dual_name(e.param), self.d(e.body), ty)
        if isinstance(e, Let):
            return Let(dual_name(e.binder), self.d(e.bound), self.d(e.body))
        if isinstance(e, If):
            return If(self.d(e.cond), self.d(e.then), self.d(e.orelse))
        if isinstance(e, Constant):
            return self.d(eta_expand_const(e.name))
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant):
                k = CONST_ARITY[head.name]
                if len(args) < k:
                    return self.d(eta_expand_const(head.name, len(args), tuple(args)))
                out = self.constant(head.name, args[:k])
                return app(out, *(self.d(a) for a in args[k:]))
            return Application(self.d(e.fun), self.d(e.arg))
        if isinstance(e, Macro):
            raise ADError(f"nested {e.kind} must be expanded before differentiation")
        raise ADError(f"cannot differentiate {e!r}")

    def numeric(self, args: list, rule: Callable) -> Expr:
        binds = []
        atoms = []
        for a in args:
            da = self.d(a)
            if _atomic(da):
                atoms.append(da)
            else:
                t = self.fresh("t")
                binds.append((t, da))
                atoms.append(Variable(t))
        self._atoms = atoms
        P = [fst(x) for x in atoms]
        T = [snd(x) for x in atoms]
        primal, tangent = rule(P, T)
        out = pair(primal, tangent)
        for t, da in reversed(binds):
            out = Let(t, da, out)
        return out

    def shared(self, args: list, primal: Callable, tangent: Callable) -> Expr:
        """Like ``numeric`` for rules whose tangent reuses the primal result."""
        y = self.fresh("y")

        def rule(P, T):
            return Variable(y), tangent(Variable(y), P, T)
        out = self.numeric(args, rule)
        # bind y = primal inside the argument lets so it can see them
        inner, wrap = out, []
        while isinstance(inner, Let):
            wrap.append((inner.binder, inner.bound))
            inner = inner.body
        P = [fst(x) for x in self._atoms]
        inner = Let(y, primal(P), inner)
        for t, b in reversed(wrap):
            inner = Let(t, b, inner)
        return inner

    def constant(self, name: str, args: list) -> Expr:
        if name == "neg":
            return self.numeric(args, lambda P, T: (const("neg", P[0]), const("neg", T[0])))
        if name in ("+", "-"):
            return self.numeric(args, lambda P, T: (const(name, P[0], P[1]), const(name, T[0], T[1])))
        if name == "*":
            return self.numeric(args, lambda P, T: (
                const("*", P[0], P[1]),
                const("+", const("*", T[0], P[1]), const("*", P[0], T[1]))))
        if name == "/":
            return self.numeric(args, lambda P, T: (
                const("/", P[0], P[1]),
                const("/", const("-", const("*", T[0], P[1]), const("*", P[0], T[1])),
                      const("*", P[1], P[1]))))
        if name == "**":
            c = args[1]
            if isinstance(c, ScalarLit):
                # constant exponent: avoids log of the base, which is nan for x < 0
                return self.numeric(args[:1], lambda P, T: (
                    const("**", P[0], c),
                    const("*", T[0], const("*", c, const("**", P[0], lit(c.value - 1.0))))))
            return self.numeric(args, lambda P, T: (
                const("**", P[0], P[1]),
                const("*",
                      const("+", const("/", const("*", P[1], T[0]), P[0]),
                            const("*", const("log", P[0]), T[1])),
                      const("**", P[0], P[1]))))
        if name == "sin":
            return self.numeric(args, lambda P, T: (
                const("sin", P[0]), const("*", T[0], const("cos", P[0]))))
        if name == "cos":
            return self.numeric(args, lambda P, T: (
                const("cos", P[0]), const("*", const("neg", T[0]), const("sin", P[0]))))
        if name == "tan":
            return self.numeric(args, lambda P, T: (
                const("tan", P[0]), const("/", T[0], const("**", const("cos", P[0]), lit(2.0)))))
        if name == "log":
            return self.numeric(args, lambda P, T: (const("log", P[0]), const("/", T[0], P[0])))
        if name == "exp":
            return self.shared(args, lambda P: const("exp", P[0]),
                               lambda y, P, T: const("*", T[0], y))
        if name == "sqrt":
            return self.shared(args, lambda P: const("sqrt", P[0]),
                               lambda y, P, T: const("/", T[0], const("*", lit(2.0), y)))
        if name in COMPARE:
            return const(name, fst(self.d(args[0])), fst(self.d(args[1])))
        if name in LOGIC or name == "!":
            return const(name, *(self.d(a) for a in args))
        if name == "build":
            i = self.fresh("i")
            body = Application(self.d(args[1]), pair(Variable(i), IndexLit(0)))
            return const("build", fst(self.d(args[0])), Abstraction(i, body))
        if name == "ifold":
            x, i = self.fresh("x"), self.fresh("i")
            body = app(self.d(args[0]), Variable(x), pair(Variable(i), IndexLit(0)))
            return const("ifold", lam([x, i], body), self.d(args[1]), fst(self.d(args[2])))
        if name == "get":
            return const("get", self.d(args[0]), fst(self.d(args[1])))
        if name == "length":
            return pair(const("length", self.d(args[0])), CardLit(0))
        if name in ("pair", "fst", "snd"):
            return const(name, *(self.d(a) for a in args))
        raise UnsupportedConstant(name)


def transform(e: Expr) -> Expr:
    """The dual-number transform of ``e``."""
    return _Transform(e).d(e)


def transform_type(t: Ty) -> Ty:
    return dual_type(t)


# --------------------------------------------------------------------------- #
# seeding helpers

def dual(e1: Expr, e2: Expr, ty: Ty) -> Expr:
    if ty == DOUBLE:
        return pair(e1, e2)
    if ty == VECTOR:
        return app(Variable("vectorZip"), e1, e2)
    if ty == MATRIX:
        return app(Variable("matrixZip"), e1, e2)
    raise UnsupportedIndependentType(ty)


def zero_of(e: Expr, ty: Ty) -> Expr:
    if ty == DOUBLE:
        return lit(0.0)
    if ty == VECTOR:
        return app(Variable("vectorZeros"), const("length", e))
    if ty == MATRIX:
        return app(Variable("matrixZeros"), app(Variable("matrixRows"), e),
                   app(Variable("matrixCols"), e))
    raise UnsupportedIndependentType(ty)


def one_hot_of(e: Expr, ty: Ty) -> Expr:
    ri, ci = (Variable(n) for n in RESERVED)
    if ty == DOUBLE:
        return lit(1.0)
    if ty == VECTOR:
        return app(Variable("vectorHot"), const("length", e), ri)
    if ty == MATRIX:
        return app(Variable("matrixHot"), app(Variable("matrixRows"), e),
                   app(Variable("matrixCols"), e), ri, ci)
    raise UnsupportedIndependentType(ty)


def dual_zero(e: Expr, ty: Ty, avoid: set) -> Expr:
    """Dual encoding of ``e`` with a zero tangent, for any first-order type."""
    if ty in (DOUBLE, VECTOR, MATRIX):
        return dual(e, zero_of(e, ty), ty)
    if isinstance(ty, Num):
        return pair(e, IndexLit(0) if ty.kind == "Index" else CardLit(0))
    if isinstance(ty, BoolT):
        return e
    if isinstance(ty, PairT):
        return pair(dual_zero(fst(e), ty.left, avoid), dual_zero(snd(e), ty.right, avoid))
    if isinstance(ty, Array):
        k = fresh_name("k", avoid)
        avoid.add(k)
        return const("build", const("length", e),
                     Abstraction(k, dual_zero(const("get", e, Variable(k)), ty.elem, avoid)))
    raise UnsupportedIndependentType(ty)


# --------------------------------------------------------------------------- #
# macro expansion

class _Recorder(Checker):
    """Type checker that remembers the typing context of every macro and the
    definition of every let-bound name."""

    def __init__(self):
        super().__init__()
        self.sites: dict[int, dict] = {}
        self.defs: dict[str, Expr] = {}

    def synth(self, env, e):
        if isinstance(e, Let):
            self.defs[e.binder] = e.bound
        if isinstance(e, Macro):
            seen = self.sites.get(id(e))
            if seen is not None and any(
                    _plain(seen.get(v)) != _plain(env.get(v)) for v in e.fvs):
                raise ADError(f"{e.kind} is used at more than one type")
            self.sites[id(e)] = env
        return super().synth(env, e)


def _plain(t):
    return t if not isinstance(t, Template) else "template"


class Expander:
    def __init__(self, optimize: bool = True, pipeline=None):
        self.optimize = optimize
        self.pipeline = pipeline
        self.rec = _Recorder()

    def run(self, e: Expr, env: Optional[dict] = None) -> Expr:
        if not _has_macro(e):
            return e
        for n in binders(e):
            if n in RESERVED:
                raise ReservedName(n)
        e = uniquify(e)
        self.rec.synth(dict(env or {}), e)
        return self.walk(e)

    def walk(self, e: Expr) -> Expr:
        if not _has_macro(e):
            return e
        if isinstance(e, Macro):
            args = tuple(self.walk(a) for a in e.args)
            env = self.rec.sites.get(id(e))
            if env is None:
                raise ADError(f"cannot determine the types around {e.kind}; it is never used")
            if e.kind == "deriv":
                return self.deriv(args[0], args[1].name, env)
            return self.api(e.kind, args[0], env)
        if isinstance(e, Application):
            return Application(self.walk(e.fun), self.walk(e.arg))
        if isinstance(e, Abstraction):
            return Abstraction(e.param, self.walk(e.body), e.ty)
        if isinstance(e, Let):
            return Let(e.binder, self.walk(e.bound), self.walk(e.body))
        if isinstance(e, If):
            return If(self.walk(e.cond), self.walk(e.then), self.walk(e.orelse))
        return e

    # -- shared pieces
    def close_functions(self, e: Expr, env: dict) -> Expr:
        """Bind function-valued free variables of ``e`` (user or library
        definitions) by lets so that only first-order ones remain free."""
        defs = prelude.definitions()
        order: list[tuple[str, Expr]] = []
        seen: set[str] = set()

        def need(name: str):
            if name in seen:
                return
            t = env.get(name)
            if isinstance(t, Ty) and not isinstance(t, Fun):
                return
            seen.add(name)
            if isinstance(t, Template):
                body = t.lam
            elif isinstance(t, Fun):
                if name not in self.rec.defs:
                    raise ADError(f"cannot differentiate through the function parameter {name!r}")
                body = self.rec.defs[name]
            elif name in defs:
                body = defs[name]
            else:
                raise NotFree(name)
            for v in body.fvs:
                need(v)
            order.append((name, body))

        for v in e.fvs:
            need(v)
        for name, body in reversed(order):
            e = Let(name, body, e)
        return e

    def normalize(self, e: Expr, env: dict) -> Expr:
        if not self.optimize:
            return e
        from .opt.pipeline import normalize
        types = {k: default_int(v) for k, v in env.items() if isinstance(v, Ty)}
        return normalize(e, self.pipeline, env=types)

    def first_order_type(self, name: str, env: dict) -> Ty:
        t = env.get(name)
        if not isinstance(t, Ty) or isinstance(t, Fun):
            raise ADError(f"free variable {name!r} of a differentiated term must be first-order")
        return default_int(t)

    # -- the deriv construct
    def deriv(self, e: Expr, x: str, env: dict) -> Expr:
        xt = env.get(x)
        if xt is None:
            raise NotFree(x)
        if not isinstance(xt, Ty) or default_int(xt) not in (DOUBLE, VECTOR, MATRIX):
            raise UnsupportedIndependentType(xt if isinstance(xt, Ty) else "function")
        xt = default_int(xt)
        e0 = self.normalize(self.close_functions(e, env), env)
        fvs = list(e0.fvs)
        f = e0
        for v in reversed(fvs):
            f = Abstraction(v, f, self.first_order_type(v, env))
        avoid = set(all_names(e0)) | set(RESERVED)
        args = []
        for v in fvs:
            vt = self.first_order_type(v, env)
            if v == x:
                args.append(dual(Variable(v), one_hot_of(Variable(v), vt), vt))
            else:
                args.append(dual_zero(Variable(v), vt, avoid))
        df = app(transform(f), *args)
        ri, ci = RESERVED
        if xt == VECTOR:
            df = const("build", const("length", Variable(x)), Abstraction(ri, df))
        elif xt == MATRIX:
            df = const("build", app(Variable("matrixRows"), Variable(x)), Abstraction(
                ri, const("build", app(Variable("matrixCols"), Variable(x)), Abstraction(ci, df))))
        return self.normalize(df, env)

    # -- diff, grad, jacob, ...
    def api(self, kind: str, f: Expr, env: dict) -> Expr:
        f0 = self.close_functions(f, env)
        fvs = list(f0.fvs)
        fc = f0
        for v in reversed(fvs):
            fc = Abstraction(v, fc, self.first_order_type(v, env))
        avoid = set(all_names(f0)) | set(prelude.names())
        args = [dual_zero(Variable(v), self.first_order_type(v, env), avoid) for v in fvs]
        df = app(transform(fc), *args)
        if kind in ("diff", "vdiff", "mdiff"):
            x = fresh_name("x", avoid)
            out = Abstraction(x, Application(df, pair(Variable(x), lit(1.0))), DOUBLE)
        elif kind in ("grad", "jacob"):
            v, i = fresh_name("v", avoid), fresh_name("i", avoid)
            hot = app(Variable("vectorHot"), const("length", Variable(v)), Variable(i))
            body = Application(df, app(Variable("vectorZip"), Variable(v), hot))
            out = Abstraction(v, const("build", const("length", Variable(v)), Abstraction(i, body)), VECTOR)
        elif kind == "mgrad":
            m, i, j = (fresh_name(h, avoid) for h in ("m", "i", "j"))
            rows = app(Variable("matrixRows"), Variable(m))
            cols = app(Variable("matrixCols"), Variable(m))
            hot = app(Variable("matrixHot"), rows, cols, Variable(i), Variable(j))
            body = Application(df, app(Variable("matrixZip"), Variable(m), hot))
            out = Abstraction(m, const("build", rows, Abstraction(
                i, const("build", cols, Abstraction(j, body)))), MATRIX)
        else:
            raise ADError(f"unknown construct {kind}")
        return self.normalize(out, env)


def _has_macro(e: Expr) -> bool:
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Macro):
            return True
        if isinstance(t, Application):
            stack.append(t.fun)
            stack.append(t.arg)
        elif isinstance(t, Abstraction):
            stack.append(t.body)
        elif isinstance(t, Let):
            stack.append(t.bound)
            stack.append(t.body)
        elif isinstance(t, If):
            stack.extend((t.cond, t.then, t.orelse))
    return False


def expand(e: Expr, env: Optional[dict] = None, optimize: bool = True, pipeline=None) -> Expr:
    """Expand every differentiation construct in ``e``.

    ``env`` gives the types of free variables.  With ``optimize`` each
    expansion is normalized before enclosing ones are expanded; without it
    the raw expansion is returned (the unoptimized baseline).
    """
    return Expander(optimize, pipeline).run(e, env)


def derive(e: Expr, x: str, env: dict, optimize: bool = True, pipeline=None) -> Expr:
    """``deriv e x`` in a context where free variables have types ``env``."""
    return expand(Macro("deriv", (e, Variable(x))), env, optimize, pipeline)
