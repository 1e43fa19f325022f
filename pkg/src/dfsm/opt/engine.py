"""Rewrite engine: rules, traversal context and fixpoint iteration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..syntax import (
    Abstraction, Application, CardLit, Constant, Expr, If, IndexLit, Let, Macro, Ty,
    spine, app,
)
from ..typecheck import Checker, Template, default_int, INDEX

FAMILIES = ("Ring", "Lambda", "Fusion", "TuplePE", "Iteration", "Conditional",
            "Fission", "LICM", "SoA")


@dataclass(frozen=True)
class RewriteRule:
    name: str
    family: str
    fn: Callable[[Expr, "Ctx"], Optional[Expr]]

    def __call__(self, e: Expr, ctx: "Ctx") -> Optional[Expr]:
        return self.fn(e, ctx)


class _Lazy:
    __slots__ = ("thunk", "value", "done")

    def __init__(self, thunk):
        self.thunk = thunk
        self.done = False
        self.value = None

    def force(self):
        if not self.done:
            self.done = True
            try:
                self.value = self.thunk()
            except RecursionError:
                self.value = None
        return self.value


_checker = None


def _get_checker() -> Checker:
    global _checker
    if _checker is None:
        _checker = Checker()
    return _checker


@dataclass(frozen=True)
class Ctx:
    """What a rule may know about the position of the term it inspects."""
    types: dict = field(default_factory=dict)       # name -> _Lazy
    loopvars: frozenset = frozenset()                # enclosing build/ifold indices
    depth: dict = field(default_factory=dict)        # name -> binder depth
    level: int = 0

    def bind(self, name: str, ty=None, loop: bool = False) -> "Ctx":
        lazy = ty if isinstance(ty, _Lazy) else _Lazy(lambda: ty)
        loopvars = self.loopvars | {name} if loop else self.loopvars - {name}
        return Ctx({**self.types, name: lazy}, loopvars,
                   {**self.depth, name: self.level + 1}, self.level + 1)

    def lazy_type(self, e: Expr) -> _Lazy:
        return _Lazy(lambda: self.type_of(e))

    def type_of(self, e: Expr) -> Optional[Ty]:
        """Type of ``e`` here, or None when it cannot be determined."""
        env = {}
        for v in e.fvs:
            lz = self.types.get(v)
            if lz is None:
                continue  # library names resolve through the checker
            t = lz.force()
            if t is None:
                return None
            env[v] = t
        try:
            t = _get_checker().synth(env, e)
        except Exception:
            return None
        if isinstance(t, Template):
            return None
        return t

    def var_depth(self, name: str) -> int:
        return self.depth.get(name, -1)


class FixpointExceeded(Exception):
    def __init__(self, phase: str):
        super().__init__(f"rewrite phase {phase!r} did not reach a fixpoint within its bound")
        self.phase = phase


def _fix_literal_kind(old: Expr, new: Expr, ctx: Ctx) -> Expr:
    # an integer literal replacing an Index-typed term must stay an index
    if isinstance(new, CardLit) and not isinstance(old, CardLit):
        t = ctx.type_of(old)
        if t == INDEX:
            return IndexLit(new.value)
    return new


class Rewriter:
    """Applies a rule set leftmost-outermost until nothing fires."""

    def __init__(self, rules: list, max_passes: int = 50, name: str = "phase",
                 trace: Optional[list] = None):
        self.rules = rules
        self.max_passes = max_passes
        self.name = name
        self.trace = trace
        self.fired = 0

    def run(self, e: Expr, ctx: Ctx) -> Expr:
        for _ in range(self.max_passes):
            before = self.fired
            e = self.visit(e, ctx)
            if self.fired == before:
                return e
        raise FixpointExceeded(self.name)

    def at_node(self, e: Expr, ctx: Ctx) -> Expr:
        for _ in range(200):
            for r in self.rules:
                out = r.fn(e, ctx)
                if out is not None and out is not e:
                    out = _fix_literal_kind(e, out, ctx)
                    self.fired += 1
                    if self.trace is not None:
                        self.trace.append(r.name)
                    e = out
                    break
            else:
                return e
        raise FixpointExceeded(self.name)

    def visit(self, e: Expr, ctx: Ctx) -> Expr:
        e = self.at_node(e, ctx)
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant):
                new = [self.visit_arg(head.name, k, a, args, ctx) for k, a in enumerate(args)]
                if any(n is not a for n, a in zip(new, args)):
                    return app(head, *new)
                return e
            f = self.visit(e.fun, ctx)
            a = self.visit(e.arg, ctx)
            if f is e.fun and a is e.arg:
                return e
            return Application(f, a)
        if isinstance(e, Abstraction):
            b = self.visit(e.body, ctx.bind(e.param, e.ty))
            return e if b is e.body else Abstraction(e.param, b, e.ty)
        if isinstance(e, Let):
            bound = self.visit(e.bound, ctx)
            body = self.visit(e.body, ctx.bind(e.binder, ctx.lazy_type(bound)))
            if bound is e.bound and body is e.body:
                return e
            return Let(e.binder, bound, body)
        if isinstance(e, If):
            c = self.visit(e.cond, ctx)
            t = self.visit(e.then, ctx)
            f = self.visit(e.orelse, ctx)
            if c is e.cond and t is e.then and f is e.orelse:
                return e
            return If(c, t, f)
        return e

    def visit_arg(self, name: str, k: int, a: Expr, args: list, ctx: Ctx) -> Expr:
        if name == "build" and k == 1 and isinstance(a, Abstraction):
            b = self.visit(a.body, ctx.bind(a.param, INDEX, loop=True))
            return a if b is a.body else Abstraction(a.param, b, a.ty)
        if name == "ifold" and k == 0 and isinstance(a, Abstraction) \
                and isinstance(a.body, Abstraction) and len(args) == 3:
            inner = a.body
            state = ctx.lazy_type(args[1])
            c2 = ctx.bind(a.param, state).bind(inner.param, INDEX, loop=True)
            b = self.visit(inner.body, c2)
            if b is inner.body:
                return a
            return Abstraction(a.param, Abstraction(inner.param, b, inner.ty), a.ty)
        return self.visit(a, ctx)


def loop_context(ctx: Ctx, name: str, k: int, lam: Abstraction, args: list):
    """Context and body for the function argument of a build or ifold."""
    if name == "build":
        return ctx.bind(lam.param, INDEX, loop=True), lam.body
    inner = lam.body
    c2 = ctx.bind(lam.param, ctx.lazy_type(args[1])).bind(inner.param, INDEX, loop=True)
    return c2, inner.body


def root_context(env: Optional[dict]) -> Ctx:
    ctx = Ctx()
    for k, t in (env or {}).items():
        ctx = ctx.bind(k, t)
    return ctx
