"""Abstract syntax of the core language: terms, types, and the basic
syntactic operations every transformation relies on (free variables,
capture-avoiding substitution, alpha-equivalence, fresh names).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional


# --------------------------------------------------------------------------- #
# Types

class Ty:
    """Base class of the type language."""

    def __str__(self) -> str:
        from .printer import show_type
        return show_type(self)


@dataclass(frozen=True, eq=True)
class Fun(Ty):
    frm: Ty
    to: Ty


@dataclass(frozen=True, eq=True)
class Num(Ty):
    # "Int" is the internal kind of integer literals: it joins with Index or Card
    kind: str


@dataclass(frozen=True, eq=True)
class Array(Ty):
    elem: Ty


@dataclass(frozen=True, eq=True)
class PairT(Ty):
    left: Ty
    right: Ty


@dataclass(frozen=True, eq=True)
class BoolT(Ty):
    pass


DOUBLE = Num("Double")
INDEX = Num("Index")
CARD = Num("Card")
INT = Num("Int")
BOOL = BoolT()
VECTOR = Array(DOUBLE)
MATRIX = Array(VECTOR)
DOUBLE_D = PairT(DOUBLE, DOUBLE)
VECTOR_D = Array(DOUBLE_D)
MATRIX_D = Array(VECTOR_D)

TYPE_NAMES = {
    "Double": DOUBLE,
    "Index": INDEX,
    "Card": CARD,
    "Bool": BOOL,
    "Vector": VECTOR,
    "Matrix": MATRIX,
    "DoubleD": DOUBLE_D,
    "VectorD": VECTOR_D,
    "MatrixD": MATRIX_D,
}


def is_functional(t: Ty) -> bool:
    return isinstance(t, Fun)


def is_int_kind(t: Ty) -> bool:
    return isinstance(t, Num) and t.kind != "Double"


def fun_type(*tys: Ty) -> Ty:
    """fun_type(a, b, c) is a => b => c."""
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = Fun(t, out)
    return out


# --------------------------------------------------------------------------- #
# Terms

ARITH = ("+", "-", "*", "/", "**")
UNARY = ("neg", "sin", "cos", "tan", "log", "exp", "sqrt")
COMPARE = (">", "<", "==", "<>")
LOGIC = ("&&", "||")
ARRAY_OPS = ("build", "ifold", "get", "length")
PAIR_OPS = ("pair", "fst", "snd")

CONST_ARITY = {
    **{c: 2 for c in ARITH},
    **{c: 1 for c in UNARY},
    **{c: 2 for c in COMPARE},
    **{c: 2 for c in LOGIC},
    "!": 1,
    "build": 2,
    "ifold": 3,
    "get": 2,
    "length": 1,
    "pair": 2,
    "fst": 1,
    "snd": 1,
}

# constants that count as scalar operations at run time
SCALAR_CONSTS = frozenset(ARITH + UNARY + COMPARE + LOGIC + ("!",))

MACRO_KINDS = ("deriv", "diff", "vdiff", "mdiff", "grad", "jacob", "mgrad")

# distinguished index names used by derivative expansion
RESERVED = ("ri", "ci")


class Expr:
    """Base class of terms.  Subclasses are frozen dataclasses."""

    @cached_property
    def fvs(self) -> tuple[str, ...]:
        out: dict[str, None] = {}
        _collect_fv(self, frozenset(), out)
        return tuple(out)

    @cached_property
    def fv_set(self) -> frozenset[str]:
        return frozenset(self.fvs)

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in children(self))

    def __str__(self) -> str:
        from .printer import pretty
        return pretty(self)


@dataclass(frozen=True, eq=True)
class Application(Expr):
    fun: Expr
    arg: Expr


@dataclass(frozen=True, eq=True)
class Abstraction(Expr):
    param: str
    body: Expr
    ty: Optional[Ty] = field(default=None, compare=False)


@dataclass(frozen=True, eq=True)
class Variable(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class ScalarLit(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class IndexLit(Expr):
    value: int


@dataclass(frozen=True, eq=True)
class CardLit(Expr):
    value: int


@dataclass(frozen=True, eq=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True, eq=True)
class Constant(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Let(Expr):
    binder: str
    bound: Expr
    body: Expr


@dataclass(frozen=True, eq=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True, eq=True)
class Macro(Expr):
    """A differentiation construct awaiting expansion.

    ``deriv`` carries ``(expr, Variable(wrt))``; the API forms carry ``(f,)``.
    """
    kind: str
    args: tuple


LITERALS = (ScalarLit, IndexLit, CardLit, BoolLit)


def _collect_fv(e: Expr, bound: frozenset, out: dict) -> None:
    # iterative over application spines keeps recursion shallow on long chains
    while True:
        if isinstance(e, Variable):
            if e.name not in bound:
                out.setdefault(e.name, None)
            return
        if isinstance(e, Application):
            _collect_fv(e.fun, bound, out)
            e = e.arg
            continue
        if isinstance(e, Abstraction):
            bound = bound | {e.param}
            e = e.body
            continue
        if isinstance(e, Let):
            _collect_fv(e.bound, bound, out)
            bound = bound | {e.binder}
            e = e.body
            continue
        if isinstance(e, If):
            _collect_fv(e.cond, bound, out)
            _collect_fv(e.then, bound, out)
            e = e.orelse
            continue
        if isinstance(e, Macro):
            for a in e.args:
                _collect_fv(a, bound, out)
            return
        return


def children(e: Expr) -> tuple:
    if isinstance(e, Application):
        return (e.fun, e.arg)
    if isinstance(e, Abstraction):
        return (e.body,)
    if isinstance(e, Let):
        return (e.bound, e.body)
    if isinstance(e, If):
        return (e.cond, e.then, e.orelse)
    if isinstance(e, Macro):
        return e.args
    return ()


# --------------------------------------------------------------------------- #
# Construction helpers

def app(f: Expr, *args: Expr) -> Expr:
    for a in args:
        f = Application(f, a)
    return f


def const(name: str, *args: Expr) -> Expr:
    return app(Constant(name), *args)


def lam(params: Iterable[str], body: Expr) -> Expr:
    for p in reversed(list(params)):
        body = Abstraction(p, body)
    return body


def var(name: str) -> Variable:
    return Variable(name)


def pair(a: Expr, b: Expr) -> Expr:
    return const("pair", a, b)


def fst(e: Expr) -> Expr:
    return const("fst", e)


def snd(e: Expr) -> Expr:
    return const("snd", e)


def lit(x: float) -> ScalarLit:
    return ScalarLit(float(x))


def spine(e: Expr) -> tuple[Expr, list]:
    """Split ``f a1 ... an`` into ``(f, [a1, ..., an])``."""
    args = []
    while isinstance(e, Application):
        args.append(e.arg)
        e = e.fun
    args.reverse()
    return e, args


def const_app(e: Expr, name: Optional[str] = None) -> Optional[list]:
    """Arguments of a *saturated* application of a constant, else None."""
    head, args = spine(e)
    if not isinstance(head, Constant):
        return None
    if name is not None and head.name != name:
        return None
    if len(args) != CONST_ARITY[head.name]:
        return None
    return args


def const_name(e: Expr) -> Optional[str]:
    """Name of the constant at the head of a saturated application."""
    head, args = spine(e)
    if isinstance(head, Constant) and len(args) == CONST_ARITY[head.name]:
        return head.name
    return None


def is_literal(e: Expr) -> bool:
    return isinstance(e, LITERALS)


def is_zero(e: Expr) -> bool:
    return isinstance(e, (ScalarLit, IndexLit, CardLit)) and e.value == 0


def is_one(e: Expr) -> bool:
    return isinstance(e, (ScalarLit, IndexLit, CardLit)) and e.value == 1


# --------------------------------------------------------------------------- #
# Names

_TRAILING_DIGITS = re.compile(r"^(.*?)(\d*)$")


def fresh_name(hint: str, avoid) -> str:
    """Deterministic name based on ``hint`` that is not in ``avoid``."""
    if hint not in avoid:
        return hint
    base = _TRAILING_DIGITS.match(hint).group(1) or hint
    k = 1
    while f"{base}{k}" in avoid:
        k += 1
    return f"{base}{k}"


def all_names(e: Expr) -> set[str]:
    """Every variable name occurring in ``e``, bound or free."""
    out: set[str] = set()
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Variable):
            out.add(t.name)
        elif isinstance(t, Abstraction):
            out.add(t.param)
        elif isinstance(t, Let):
            out.add(t.binder)
        stack.extend(children(t))
    return out


# --------------------------------------------------------------------------- #
# Substitution

def free_vars(e: Expr) -> tuple[str, ...]:
    """Free variables of ``e`` in first-occurrence order."""
    return e.fvs


def rename(e: Expr, old: str, new: str) -> Expr:
    return substitute(e, old, Variable(new))


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding ``e[x := v]``."""
    if x not in e.fv_set:
        return e
    return _subst(e, x, v, v.fv_set)


def _subst(e: Expr, x: str, v: Expr, vfv: frozenset) -> Expr:
    if x not in e.fv_set:
        return e
    if isinstance(e, Variable):
        return v
    if isinstance(e, Application):
        return Application(_subst(e.fun, x, v, vfv), _subst(e.arg, x, v, vfv))
    if isinstance(e, Abstraction):
        p, body = e.param, e.body
        if p in vfv:
            p2 = fresh_name(p, vfv | body.fv_set | {x})
            body = rename(body, p, p2)
            p = p2
        return Abstraction(p, _subst(body, x, v, vfv), e.ty)
    if isinstance(e, Let):
        bound = _subst(e.bound, x, v, vfv)
        b, body = e.binder, e.body
        if b == x:
            return Let(b, bound, body)
        if b in vfv:
            b2 = fresh_name(b, vfv | body.fv_set | {x})
            body = rename(body, b, b2)
            b = b2
        return Let(b, bound, _subst(body, x, v, vfv))
    if isinstance(e, If):
        return If(_subst(e.cond, x, v, vfv), _subst(e.then, x, v, vfv),
                  _subst(e.orelse, x, v, vfv))
    if isinstance(e, Macro):
        args = tuple(_subst(a, x, v, vfv) for a in e.args)
        if e.kind == "deriv" and not isinstance(args[1], Variable):
            raise ValueError("cannot substitute a non-variable for a deriv independent variable")
        return Macro(e.kind, args)
    return e


def subst_many(e: Expr, mapping: dict) -> Expr:
    """Sequential substitution; the replacement terms must not mention the
    substituted names (which holds for the fresh-name uses in this package)."""
    for x, v in mapping.items():
        e = substitute(e, x, v)
    return e


def replace_subterm(e: Expr, target: Expr, repl: Expr, bound: frozenset = frozenset()) -> Expr:
    """Replace every occurrence of ``target`` (alpha-equivalent, with none of
    its free variables captured) by ``repl``."""
    tfv = target.fv_set
    if not (bound & tfv) and alpha_eq(e, target):
        return repl
    if isinstance(e, Application):
        return Application(replace_subterm(e.fun, target, repl, bound),
                           replace_subterm(e.arg, target, repl, bound))
    if isinstance(e, Abstraction):
        return Abstraction(e.param, replace_subterm(e.body, target, repl, bound | {e.param}), e.ty)
    if isinstance(e, Let):
        return Let(e.binder, replace_subterm(e.bound, target, repl, bound),
                   replace_subterm(e.body, target, repl, bound | {e.binder}))
    if isinstance(e, If):
        return If(replace_subterm(e.cond, target, repl, bound),
                  replace_subterm(e.then, target, repl, bound),
                  replace_subterm(e.orelse, target, repl, bound))
    return e


# --------------------------------------------------------------------------- #
# Alpha-equivalence

def alpha_eq(e1: Expr, e2: Expr) -> bool:
    """Syntactic equality up to consistent renaming of bound variables.
    Parameter annotations are ignored."""
    return _alpha(e1, e2, {}, {}, 0)


def _alpha(a: Expr, b: Expr, ma: dict, mb: dict, depth: int) -> bool:
    while True:
        if type(a) is not type(b):
            return False
        if isinstance(a, Variable):
            la, lb = ma.get(a.name), mb.get(b.name)
            if la is None and lb is None:
                return a.name == b.name
            return la == lb
        if isinstance(a, Application):
            if not _alpha(a.fun, b.fun, ma, mb, depth):
                return False
            a, b = a.arg, b.arg
            continue
        if isinstance(a, Abstraction):
            ma = {**ma, a.param: depth}
            mb = {**mb, b.param: depth}
            a, b, depth = a.body, b.body, depth + 1
            continue
        if isinstance(a, Let):
            if not _alpha(a.bound, b.bound, ma, mb, depth):
                return False
            ma = {**ma, a.binder: depth}
            mb = {**mb, b.binder: depth}
            a, b, depth = a.body, b.body, depth + 1
            continue
        if isinstance(a, If):
            if not (_alpha(a.cond, b.cond, ma, mb, depth)
                    and _alpha(a.then, b.then, ma, mb, depth)):
                return False
            a, b = a.orelse, b.orelse
            continue
        if isinstance(a, Macro):
            return (a.kind == b.kind and len(a.args) == len(b.args)
                    and all(_alpha(x, y, ma, mb, depth) for x, y in zip(a.args, b.args)))
        if isinstance(a, ScalarLit):
            # -0.0 and 0.0 print identically; treat them as the same literal
            return a.value == b.value or (a.value != a.value and b.value != b.value)
        return a == b


# --------------------------------------------------------------------------- #
# Misc structural helpers

def eta_expand_const(name: str, have: int = 0, args: tuple = ()) -> Expr:
    """``fun a b -> c args a b`` for a constant missing arguments."""
    missing = CONST_ARITY[name] - have
    avoid = set()
    for a in args:
        avoid |= a.fv_set
    params = []
    for k in range(missing):
        p = fresh_name(f"eta{k}", avoid)
        avoid.add(p)
        params.append(p)
    return lam(params, const(name, *args, *(Variable(p) for p in params)))


def occurrences(e: Expr, x: str) -> tuple[int, bool]:
    """(number of free occurrences of x in e, whether any sits under a lambda)."""
    count = 0
    under = False
    stack = [(e, False)]
    while stack:
        t, ul = stack.pop()
        if x not in t.fv_set:
            continue
        if isinstance(t, Variable):
            count += 1
            under = under or ul
        elif isinstance(t, Abstraction):
            stack.append((t.body, True))
        else:
            for c in children(t):
                stack.append((c, ul))
    return count, under


def uniquify(e: Expr) -> Expr:
    """Rename binders so that every binder name is unique in the term and
    distinct from the free variables."""
    used = set(e.fvs)
    return _uniq(e, used, {})


def _uniq(e: Expr, used: set, env: dict) -> Expr:
    if isinstance(e, Variable):
        n = env.get(e.name)
        return Variable(n) if n is not None else e
    if isinstance(e, Application):
        return Application(_uniq(e.fun, used, env), _uniq(e.arg, used, env))
    if isinstance(e, Abstraction):
        p = fresh_name(e.param, used)
        used.add(p)
        return Abstraction(p, _uniq(e.body, used, {**env, e.param: p}), e.ty)
    if isinstance(e, Let):
        bound = _uniq(e.bound, used, env)
        b = fresh_name(e.binder, used)
        used.add(b)
        return Let(b, bound, _uniq(e.body, used, {**env, e.binder: b}))
    if isinstance(e, If):
        return If(_uniq(e.cond, used, env), _uniq(e.then, used, env), _uniq(e.orelse, used, env))
    if isinstance(e, Macro):
        return Macro(e.kind, tuple(_uniq(a, used, env) for a in e.args))
    return e


def binders(e: Expr) -> list[str]:
    out = []
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Abstraction):
            out.append(t.param)
        elif isinstance(t, Let):
            out.append(t.binder)
        stack.extend(children(t))
    return out
