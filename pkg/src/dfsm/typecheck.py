"""Monomorphic bidirectional type checker.

Lambdas without parameter annotations (and constants used unsaturated) are
treated as templates: their bodies are checked afresh at every application
site, using the argument types found there.  A top-level template is an
error, so whole programs must annotate their parameters.

Integer literals get the internal kind ``Int`` which joins with both Index
and Card; it is reported as Card.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    Abstraction, Application, Array, BoolLit, BoolT, CardLit, Constant, Expr, Fun,
    If, IndexLit, Let, Macro, Num, PairT, ScalarLit, Ty, Variable,
    ARITH, BOOL, CARD, COMPARE, CONST_ARITY, DOUBLE, INDEX, INT, LOGIC, MATRIX, VECTOR,
    eta_expand_const, spine,
)


class TypeError(Exception):  # noqa: A001  shadows the builtin in this module only
    """A subexpression had a type other than the one required."""

    def __init__(self, subexpression: Expr, expected: str, found: str):
        self.subexpression = subexpression
        self.expected = expected
        self.found = found
        super().__init__(f"type error in `{_short(subexpression)}`: expected {expected}, found {found}")


class UnboundVariable(Exception):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


def _short(e: Expr, limit: int = 80) -> str:
    s = " ".join(str(e).split())
    return s if len(s) <= limit else s[: limit - 3] + "..."


@dataclass(frozen=True)
class Template:
    """An abstraction whose parameter types are fixed at each use."""
    lam: Expr
    env: dict

    def __hash__(self):
        return id(self)


TyOrT = Union[Ty, Template]


# --------------------------------------------------------------------------- #
# type algebra

def join(a: Ty, b: Ty) -> Optional[Ty]:
    """Least common type of ``a`` and ``b`` with Int absorbed, or None."""
    if a == b:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        if a.kind == "Int" and b.kind in ("Index", "Card"):
            return b
        if b.kind == "Int" and a.kind in ("Index", "Card"):
            return a
        return None
    if isinstance(a, Array) and isinstance(b, Array):
        e = join(a.elem, b.elem)
        return None if e is None else Array(e)
    if isinstance(a, PairT) and isinstance(b, PairT):
        l, r = join(a.left, b.left), join(a.right, b.right)
        return None if l is None or r is None else PairT(l, r)
    if isinstance(a, Fun) and isinstance(b, Fun):
        f, t = join(a.frm, b.frm), join(a.to, b.to)
        return None if f is None or t is None else Fun(f, t)
    return None


def default_int(t: Ty) -> Ty:
    """Replace the literal kind Int by Card throughout."""
    if isinstance(t, Num):
        return CARD if t.kind == "Int" else t
    if isinstance(t, Array):
        return Array(default_int(t.elem))
    if isinstance(t, PairT):
        return PairT(default_int(t.left), default_int(t.right))
    if isinstance(t, Fun):
        return Fun(default_int(t.frm), default_int(t.to))
    return t


def is_first_order(t: TyOrT) -> bool:
    """Non-functional type (the M of the grammar)."""
    if isinstance(t, (Num, BoolT)):
        return True
    if isinstance(t, Array):
        return is_first_order(t.elem)
    if isinstance(t, PairT):
        return is_first_order(t.left) and is_first_order(t.right)
    return False


def _int_kind(t: TyOrT) -> bool:
    return isinstance(t, Num) and t.kind in ("Index", "Card", "Int")


def dual_type(t: Ty) -> Ty:
    """The type of the dual-number transform of a term of type ``t``."""
    if isinstance(t, Fun):
        return Fun(dual_type(t.frm), dual_type(t.to))
    if isinstance(t, Num):
        return PairT(t, t)
    if isinstance(t, Array):
        return Array(dual_type(t.elem))
    if isinstance(t, PairT):
        return PairT(dual_type(t.left), dual_type(t.right))
    return t


def _show(t: TyOrT) -> str:
    if isinstance(t, Template):
        return "an unannotated function"
    return str(t)


# --------------------------------------------------------------------------- #
# checker

class Checker:
    def __init__(self, globals_: Optional[dict] = None):
        # name -> Expr for names resolved when not bound in the environment
        if globals_ is None:
            from .prelude import definitions
            globals_ = definitions()
        self.globals = globals_
        self.depth = 0

    def synth(self, env: dict, e: Expr) -> TyOrT:
        if isinstance(e, Variable):
            t = env.get(e.name)
            if t is not None:
                return t
            if e.name in self.globals:
                return Template(self.globals[e.name], {})
            raise UnboundVariable(e.name)
        if isinstance(e, ScalarLit):
            return DOUBLE
        if isinstance(e, CardLit):
            return INT
        if isinstance(e, IndexLit):
            return INDEX
        if isinstance(e, BoolLit):
            return BOOL
        if isinstance(e, Constant):
            return Template(eta_expand_const(e.name), {})
        if isinstance(e, Abstraction):
            return self.abstraction(env, e)
        if isinstance(e, Let):
            bt = self.synth(env, e.bound)
            return self.synth({**env, e.binder: bt}, e.body)
        if isinstance(e, If):
            c = self.synth(env, e.cond)
            if c != BOOL:
                raise TypeError(e.cond, "Bool", _show(c))
            a = self.synth(env, e.then)
            b = self.synth(env, e.orelse)
            if isinstance(a, Template) or isinstance(b, Template):
                raise TypeError(e, "annotated branches", "an unannotated function")
            j = join(a, b)
            if j is None:
                raise TypeError(e.orelse, _show(a), _show(b))
            return j
        if isinstance(e, Application):
            head, args = spine(e)
            if isinstance(head, Constant) and len(args) >= CONST_ARITY[head.name]:
                k = CONST_ARITY[head.name]
                t = self.constant(env, e, head.name, args[:k])
                for a in args[k:]:
                    t = self.apply(env, e, t, a)
                return t
            return self.apply(env, e, self.synth(env, e.fun), e.arg)
        if isinstance(e, Macro):
            return self.macro(env, e)
        raise TypeError(e, "a term", type(e).__name__)

    def abstraction(self, env: dict, e: Abstraction) -> TyOrT:
        if e.ty is None:
            return Template(e, env)
        body = self.synth({**env, e.param: e.ty}, e.body)
        if isinstance(body, Template):
            return Template(e, env)
        return Fun(e.ty, body)

    def apply(self, env: dict, site: Expr, ft: TyOrT, arg: Expr) -> TyOrT:
        at = self.synth(env, arg)
        return self.apply_type(site, ft, at)

    def apply_type(self, site: Expr, ft: TyOrT, at: TyOrT) -> TyOrT:
        if isinstance(ft, Template):
            return self.instantiate(site, ft, at)
        if not isinstance(ft, Fun):
            raise TypeError(site, "a function", _show(ft))
        self.expect_arg(site, ft.frm, at)
        return ft.to

    def expect_arg(self, site: Expr, want: Ty, at: TyOrT) -> None:
        if isinstance(at, Template):
            self.check_template(site, at, want)
        elif join(want, at) != want:
            raise TypeError(site, str(want), _show(at))

    def check_template(self, site: Expr, t: Template, want: Ty) -> None:
        if not isinstance(want, Fun):
            raise TypeError(site, str(want), "a function")
        r = self.instantiate(site, t, want.frm)
        if isinstance(r, Template):
            self.check_template(site, r, want.to)
        elif join(want.to, r) != want.to:
            raise TypeError(site, str(want.to), _show(r))

    def instantiate(self, site: Expr, t: Template, at: TyOrT) -> TyOrT:
        lam = t.lam
        assert isinstance(lam, Abstraction)
        if lam.ty is not None:
            self.expect_arg(site, lam.ty, at)
            at = lam.ty
        self.depth += 1
        if self.depth > 200:
            raise TypeError(site, "a non-recursive instantiation", "unbounded nesting")
        try:
            return self.synth({**t.env, lam.param: at}, lam.body)
        finally:
            self.depth -= 1

    # -- constants
    def constant(self, env: dict, site: Expr, name: str, args: list) -> Ty:
        if name == "build":
            n = self.synth(env, args[0])
            if not _int_kind(n):
                raise TypeError(args[0], "Card", _show(n))
            el = self.apply_type(site, self.synth(env, args[1]), INDEX)
            if not is_first_order(el):
                raise TypeError(args[1], "a function returning a non-functional type", _show(el))
            return Array(el)
        if name == "ifold":
            z = self.synth(env, args[1])
            if not is_first_order(z):
                raise TypeError(args[1], "a non-functional state", _show(z))
            n = self.synth(env, args[2])
            if not _int_kind(n):
                raise TypeError(args[2], "Card", _show(n))
            ft = self.synth(env, args[0])
            for _ in range(3):
                r = self.apply_type(site, self.apply_type(site, ft, z), INDEX)
                j = join(z, r) if not isinstance(r, Template) else None
                if j is None:
                    raise TypeError(args[0], f"a state function returning {_show(z)}", _show(r))
                if j == z:
                    return z
                z = j
            return z
        ts = [self.synth(env, a) for a in args]
        for a, t in zip(args, ts):
            if isinstance(t, Template) or isinstance(t, Fun):
                raise TypeError(a, "a non-functional value", _show(t))
        if name in ARITH:
            a, b = ts
            j = join(a, b)
            if not isinstance(a, Num):
                raise TypeError(args[0], "a number", _show(a))
            if j is None:
                raise TypeError(args[1], _show(a), _show(b))
            return j
        if name == "neg":
            if not isinstance(ts[0], Num):
                raise TypeError(args[0], "a number", _show(ts[0]))
            return ts[0]
        if name in ("sin", "cos", "tan", "log", "exp", "sqrt"):
            if ts[0] != DOUBLE:
                raise TypeError(args[0], "Double", _show(ts[0]))
            return DOUBLE
        if name in COMPARE:
            a, b = ts
            if not isinstance(a, Num):
                raise TypeError(args[0], "a number", _show(a))
            if join(a, b) is None:
                raise TypeError(args[1], _show(a), _show(b))
            return BOOL
        if name in LOGIC or name == "!":
            for a, t in zip(args, ts):
                if t != BOOL:
                    raise TypeError(a, "Bool", _show(t))
            return BOOL
        if name == "get":
            a, i = ts
            if not isinstance(a, Array):
                raise TypeError(args[0], "an array", _show(a))
            if not _int_kind(i):
                raise TypeError(args[1], "Index", _show(i))
            return a.elem
        if name == "length":
            if not isinstance(ts[0], Array):
                raise TypeError(args[0], "an array", _show(ts[0]))
            return CARD
        if name == "pair":
            return PairT(ts[0], ts[1])
        if name in ("fst", "snd"):
            if not isinstance(ts[0], PairT):
                raise TypeError(args[0], "a pair", _show(ts[0]))
            return ts[0].left if name == "fst" else ts[0].right
        raise TypeError(site, "a known constant", name)

    # -- differentiation macros
    def macro(self, env: dict, e: Macro) -> Ty:
        if e.kind == "deriv":
            body, x = e.args
            xt = self.synth(env, x)
            t = self.synth(env, body)
            if isinstance(t, (Template, Fun)):
                raise TypeError(body, "a non-functional expression", _show(t))
            d = dual_type(t)
            if xt == DOUBLE:
                return d
            if xt == VECTOR:
                return Array(d)
            if xt == MATRIX:
                return Array(Array(d))
            raise TypeError(x, "Double, Vector or Matrix", _show(xt))
        inp = {"diff": DOUBLE, "vdiff": DOUBLE, "mdiff": DOUBLE,
               "grad": VECTOR, "jacob": VECTOR, "mgrad": MATRIX}[e.kind]
        ft = self.synth(env, e.args[0])
        cod = self.apply_type(e, ft, inp)
        if isinstance(cod, (Template, Fun)):
            raise TypeError(e.args[0], "a first-order function", _show(cod))
        d = dual_type(cod)
        if inp == VECTOR:
            return Fun(inp, Array(d))
        if inp == MATRIX:
            return Fun(inp, Array(Array(d)))
        return Fun(inp, d)


def typecheck(env: Optional[dict], e: Expr, globals_: Optional[dict] = None) -> Ty:
    """Type of ``e`` under ``env`` (name -> Ty).  Prelude names are in scope."""
    t = Checker(globals_).synth(dict(env or {}), e)
    if isinstance(t, Template):
        raise TypeError(e, "annotated parameters", "parameter annotation required")
    return default_int(t)


def typecheck_raw(env: dict, e: Expr, globals_: Optional[dict] = None) -> TyOrT:
    """Like typecheck but keeps the literal kind and allows templates."""
    return Checker(globals_).synth(dict(env), e)
