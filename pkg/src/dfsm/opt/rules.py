"""The rewrite rules, grouped by family.

Every rule takes a term and its context and returns the rewritten term, or
None when it does not apply at that node.
"""

from __future__ import annotations

from typing import Optional

from ..interp import BINARY as _EVAL_BINARY, UNARY as _EVAL_UNARY, EvalError
from ..syntax import (
    Abstraction, Application, BoolLit, CardLit, Constant, Expr, If, IndexLit, Let,
    ScalarLit, Variable, ARITH, CONST_ARITY, UNARY as UNARY_OPS, DOUBLE, INDEX, SCALAR_CONSTS,
    all_names, alpha_eq, app, children, const, const_app, const_name, fresh_name,
    is_one, is_zero, occurrences, pair, replace_subterm, spine, substitute,
)
from .engine import Ctx, RewriteRule


# --------------------------------------------------------------------------- #
# helpers

def is_trivial(e: Expr) -> bool:
    """Cheap, duplicable terms: names, literals and projections of them."""
    while True:
        if isinstance(e, (Variable, ScalarLit, IndexLit, CardLit, BoolLit, Constant)):
            return True
        head, args = spine(e)
        if not isinstance(head, Constant):
            return False
        if head.name in ("fst", "snd", "length") and len(args) == 1:
            e = args[0]
            continue
        if head.name == "get" and len(args) == 2:
            return is_trivial(args[0]) and is_trivial(args[1])
        return False


NUMERIC_OPS = frozenset(ARITH + UNARY_OPS)


def count_ops(e: Expr, limit: int = 1 << 30, ops=SCALAR_CONSTS) -> int:
    """Saturated operations from ``ops`` plus folds in ``e`` (static count)."""
    n = 0
    stack = [e]
    while stack and n < limit:
        t = stack.pop()
        if isinstance(t, Application):
            name = const_name(t)
            if name is not None and (name in ops or name == "ifold"):
                n += 1
        stack.extend(children(t))
    return n


def has_loop(e: Expr) -> bool:
    stack = [e]
    while stack:
        t = stack.pop()
        if isinstance(t, Constant) and t.name in ("build", "ifold"):
            return True
        stack.extend(children(t))
    return False


def zero_like(ty) -> Optional[Expr]:
    if ty == DOUBLE:
        return ScalarLit(0.0)
    if ty == INDEX:
        return IndexLit(0)
    if ty is not None and getattr(ty, "kind", None) in ("Card", "Int"):
        return CardLit(0)
    return None


def _int_lit(e: Expr) -> bool:
    return isinstance(e, (IndexLit, CardLit))


def _names(*es: Expr) -> set:
    out = set()
    for e in es:
        out |= all_names(e)
    return out


def _rule(name: str, family: str):
    def deco(fn):
        fn.rule = RewriteRule(name, family, fn)
        return fn
    return deco


# --------------------------------------------------------------------------- #
# Ring

@_rule("add-zero", "Ring")
def add_zero(e, ctx):
    a = const_app(e, "+")
    if a is None:
        return None
    if is_zero(a[1]):
        return a[0]
    if is_zero(a[0]):
        return a[1]
    return None


@_rule("sub-zero", "Ring")
def sub_zero(e, ctx):
    a = const_app(e, "-")
    if a is not None and is_zero(a[1]):
        return a[0]
    return None


@_rule("zero-sub", "Ring")
def zero_sub(e, ctx):
    a = const_app(e, "-")
    if a is not None and isinstance(a[0], ScalarLit) and a[0].value == 0.0:
        return const("neg", a[1])
    return None


@_rule("mul-one", "Ring")
def mul_one(e, ctx):
    a = const_app(e, "*")
    if a is None:
        return None
    if is_one(a[1]):
        return a[0]
    if is_one(a[0]):
        return a[1]
    return None


@_rule("mul-zero", "Ring")
def mul_zero(e, ctx):
    a = const_app(e, "*")
    if a is None:
        return None
    if is_zero(a[1]):
        return a[1]
    if is_zero(a[0]):
        return a[0]
    return None


@_rule("cancel", "Ring")
def cancel(e, ctx):
    a = const_app(e, "-")
    if a is not None and alpha_eq(a[0], a[1]):
        return zero_like(ctx.type_of(a[0]))
    a = const_app(e, "+")
    if a is None:
        return None
    n1 = const_app(a[1], "neg")
    if n1 is not None and alpha_eq(a[0], n1[0]):
        return zero_like(ctx.type_of(a[0]))
    n0 = const_app(a[0], "neg")
    if n0 is not None and alpha_eq(a[1], n0[0]):
        return zero_like(ctx.type_of(a[1]))
    return None


@_rule("distribute", "Ring")
def distribute(e, ctx):
    a = const_app(e, "+")
    if a is None:
        return None
    l, r = const_app(a[0], "*"), const_app(a[1], "*")
    if l is None or r is None or not alpha_eq(l[0], r[0]):
        return None
    return const("*", l[0], const("+", l[1], r[1]))


def _lit_value(e):
    if isinstance(e, (ScalarLit, IndexLit, CardLit)):
        return e.value
    return None


@_rule("constant-fold", "Ring")
def constant_fold(e, ctx):
    name = const_name(e)
    if name is None:
        return None
    _, args = spine(e)
    if name in ("+", "-", "*", "/", "**", ">", "<", "==", "<>") and len(args) == 2:
        x, y = args
        if isinstance(x, ScalarLit) and isinstance(y, ScalarLit):
            v = _EVAL_BINARY[name](x.value, y.value)
            return BoolLit(v) if isinstance(v, bool) else ScalarLit(v)
        if _int_lit(x) and _int_lit(y):
            try:
                v = _EVAL_BINARY[name](int(x.value), int(y.value))
            except EvalError:
                return None
            if isinstance(v, bool):
                return BoolLit(v)
            kind = IndexLit if isinstance(x, IndexLit) or isinstance(y, IndexLit) else CardLit
            return kind(v)
        return None
    if name in ("neg", "sin", "cos", "tan", "log", "exp", "sqrt") and isinstance(args[0], ScalarLit):
        return ScalarLit(_EVAL_UNARY[name](args[0].value))
    return None


@_rule("neg-one", "Ring")
def neg_one(e, ctx):
    a = const_app(e, "*")
    if a is None:
        return None
    if isinstance(a[0], ScalarLit) and a[0].value == -1.0:
        return const("neg", a[1])
    if isinstance(a[1], ScalarLit) and a[1].value == -1.0:
        return const("neg", a[0])
    return None


@_rule("neg-neg", "Ring")
def neg_neg(e, ctx):
    a = const_app(e, "neg")
    if a is None:
        return None
    b = const_app(a[0], "neg")
    return b[0] if b is not None else None


# --------------------------------------------------------------------------- #
# Lambda

@_rule("beta", "Lambda")
def beta(e, ctx):
    if isinstance(e, Application) and isinstance(e.fun, Abstraction):
        return Let(e.fun.param, e.arg, e.fun.body)
    return None


def _loop_index(t: Expr) -> Optional[tuple]:
    """(index name, body) when t is a build or ifold whose function is a literal lambda."""
    args = const_app(t, "build")
    if args is not None and isinstance(args[1], Abstraction):
        return args[1].param, args[1].body
    args = const_app(t, "ifold")
    if args is not None and isinstance(args[0], Abstraction) and isinstance(args[0].body, Abstraction):
        return args[0].body.param, args[0].body.body
    return None


def _get_chain(t: Expr, x: str) -> Optional[tuple]:
    chain = []
    while (g := const_app(t, "get")) is not None:
        chain.append(g[1])
        t = g[0]
    if chain and t == Variable(x):
        return tuple(reversed(chain))
    return None


def _element(b: Expr, depth: int) -> Optional[Expr]:
    for _ in range(depth):
        args = const_app(b, "build")
        if args is None or not isinstance(args[1], Abstraction):
            return None
        b = args[1].body
    return b


def _cheap(elem: Expr) -> bool:
    """Loop-free, no arithmetic, at most one test: fine to recompute."""
    return (not has_loop(elem) and count_ops(elem, 2) <= 1
            and count_ops(elem, 1, ARITH + UNARY_OPS) == 0)


def _indexed_uses(body: Expr, x: str, bound_expr: Expr) -> Optional[tuple]:
    """(gets, repeated) if every use of x is under get/length, else None.

    Accesses to cheap elements are not counted.
    ``fst``/``snd`` of the same element count once when that element is a pair
    literal. ``repeated`` is set when some ``x[..]`` sits inside a loop whose
    index the access does not mention, so fusing would recompute elements.
    """
    per_chain: dict = {}
    repeated = False
    stack = [(body, frozenset(), frozenset())]

    def access(chain, proj, bound, loops):
        nonlocal repeated
        stack.extend((c, bound, loops) for c in chain)
        elem = _element(bound_expr, len(chain))
        if elem is not None and _cheap(elem):
            return
        if not loops <= set().union(*(c.fv_set for c in chain)):
            repeated = True
        if proj is not None and (elem is None or const_app(elem, "pair") is None):
            proj = None
        counts = per_chain.setdefault(chain, {"fst": 0, "snd": 0, None: 0})
        counts[proj] += 1

    while stack:
        t, bound, loops = stack.pop()
        if x not in t.fv_set or x in bound:
            continue
        if isinstance(t, Variable):
            return None
        if isinstance(t, Application):
            head, args = spine(t)
            if isinstance(head, Constant):
                if head.name == "length" and len(args) == 1:
                    g = const_app(args[0], "get")
                    if g is not None and g[0] == Variable(x):
                        stack.append((g[1], bound, loops))  # fuses away
                        continue
                    if args[0] == Variable(x):
                        continue
                if head.name in ("fst", "snd") and len(args) == 1:
                    chain = _get_chain(args[0], x)
                    if chain is not None:
                        access(chain, head.name, bound, loops)
                        continue
                if head.name == "get" and len(args) == 2:
                    chain = _get_chain(t, x)
                    if chain is not None:
                        access(chain, None, bound, loops)
                        continue
                loop = _loop_index(t)
                if loop is not None:
                    i, inner = loop
                    k = 0 if head.name == "ifold" else 1
                    stack.extend((a, bound, loops) for n, a in enumerate(args) if n != k)
                    names = {args[k].param, i}
                    stack.append((inner, bound | names, (loops - names) | {i}))
                    continue
            stack.append((t.fun, bound, loops))
            stack.append((t.arg, bound, loops))
        elif isinstance(t, Abstraction):
            stack.append((t.body, bound | {t.param}, loops - {t.param}))
        elif isinstance(t, Let):
            stack.append((t.bound, bound, loops))
            stack.append((t.body, bound | {t.binder}, loops - {t.binder}))
        else:
            for c in children(t):
                stack.append((c, bound, loops))
    gets = sum(max(c["fst"], c["snd"]) + c[None] for c in per_chain.values())
    return gets, repeated


@_rule("let-inline", "Lambda")
def let_inline(e, ctx):
    if not isinstance(e, Let):
        return None
    x, b, body = e.binder, e.bound, e.body
    count, under = occurrences(body, x)
    if count == 0:
        return body
    if is_trivial(b) or isinstance(b, Abstraction):
        return substitute(body, x, b)
    if count == 1 and not under:
        return substitute(body, x, b)
    args = const_app(b, "build")
    if args is not None:
        uses = _indexed_uses(body, x, b)
        if uses is not None and uses[0] <= 1 and not uses[1]:
            return substitute(body, x, b)
    return None


@_rule("dead-let", "Lambda")
def dead_let(e, ctx):
    if isinstance(e, Let) and e.binder not in e.body.fv_set:
        return e.body
    return None


def _float_name(x: str, avoid: set) -> str:
    return fresh_name(x, avoid) if x in avoid else x


@_rule("let-float", "Lambda")
def let_float(e, ctx):
    """Lets move out of application heads and arguments."""
    if not isinstance(e, Application):
        return None
    head, args = spine(e)
    parts = [head] + args
    for k, t in enumerate(parts):
        if not isinstance(t, Let):
            continue
        others = set()
        for j, o in enumerate(parts):
            if j != k:
                others |= o.fv_set
        x = _float_name(t.binder, others)
        body = t.body if x == t.binder else substitute(t.body, t.binder, Variable(x))
        parts[k] = body
        return Let(x, t.bound, app(*parts))
    return None


@_rule("let-let", "Lambda")
def let_let(e, ctx):
    if isinstance(e, Let) and isinstance(e.bound, Let):
        inner = e.bound
        y = _float_name(inner.binder, set(e.body.fv_set) | {e.binder})
        b1 = inner.body if y == inner.binder else substitute(inner.body, inner.binder, Variable(y))
        return Let(y, inner.bound, Let(e.binder, b1, e.body))
    return None


# --------------------------------------------------------------------------- #
# Fusion

@_rule("get-build", "Fusion")
def get_build(e, ctx):
    a = const_app(e, "get")
    if a is None:
        return None
    b = const_app(a[0], "build")
    if b is None:
        return None
    f = b[1]
    if isinstance(f, Abstraction):
        return Let(f.param, a[1], f.body)
    return Application(f, a[1])


@_rule("length-build", "Fusion")
def length_build(e, ctx):
    a = const_app(e, "length")
    if a is None:
        return None
    b = const_app(a[0], "build")
    return b[0] if b is not None else None


# --------------------------------------------------------------------------- #
# Tuple partial evaluation

@_rule("fst-pair", "TuplePE")
def fst_pair(e, ctx):
    a = const_app(e, "fst")
    if a is None:
        return None
    p = const_app(a[0], "pair")
    return p[0] if p is not None else None


@_rule("snd-pair", "TuplePE")
def snd_pair(e, ctx):
    a = const_app(e, "snd")
    if a is None:
        return None
    p = const_app(a[0], "pair")
    return p[1] if p is not None else None


@_rule("pair-split", "TuplePE")
def pair_split(e, ctx):
    if not isinstance(e, Let):
        return None
    p = const_app(e.bound, "pair")
    if p is None:
        return None
    avoid = _names(e.body, p[0], p[1]) | {e.binder}
    x1 = fresh_name(e.binder + "1", avoid)
    avoid.add(x1)
    x2 = fresh_name(e.binder + "2", avoid)
    body = substitute(e.body, e.binder, pair(Variable(x1), Variable(x2)))
    return Let(x1, p[0], Let(x2, p[1], body))


# --------------------------------------------------------------------------- #
# Iteration

def _ifold_lambda(f: Expr):
    """(a, i, body) for ``fun a i -> body``."""
    if isinstance(f, Abstraction) and isinstance(f.body, Abstraction):
        return f.param, f.body.param, f.body.body
    return None


@_rule("ifold-zero", "Iteration")
def ifold_zero(e, ctx):
    a = const_app(e, "ifold")
    if a is not None and _int_lit(a[2]) and a[2].value == 0:
        return a[1]
    return None


@_rule("ifold-identity", "Iteration")
def ifold_identity(e, ctx):
    a = const_app(e, "ifold")
    if a is None:
        return None
    parts = _ifold_lambda(a[0])
    if parts is not None and parts[2] == Variable(parts[0]) and parts[0] != parts[1]:
        return a[1]
    return None


PEEL_LIMIT = 4


@_rule("ifold-peel", "Iteration")
def ifold_peel(e, ctx):
    a = const_app(e, "ifold")
    if a is None or not _int_lit(a[2]) or not 1 <= a[2].value <= PEEL_LIMIT:
        return None
    f, z, n = a
    avoid = set(f.fv_set)
    acc = fresh_name("a", avoid)
    avoid.add(acc)
    i = fresh_name("i", avoid)
    step = Abstraction(acc, Abstraction(i, app(f, Variable(acc), const("+", Variable(i), IndexLit(1)))))
    return const("ifold", step, app(f, z, IndexLit(0)), type(n)(n.value - 1))


def _conjuncts(c: Expr) -> list:
    a = const_app(c, "&&")
    if a is None:
        return [c]
    return _conjuncts(a[0]) + _conjuncts(a[1])


def _conj(cs: list) -> Optional[Expr]:
    out = None
    for c in cs:
        out = c if out is None else const("&&", out, c)
    return out


@_rule("single-access", "Iteration")
def single_access(e, ctx):
    a = const_app(e, "ifold")
    if a is None:
        return None
    parts = _ifold_lambda(a[0])
    if parts is None:
        return None
    acc, i, body = parts
    if acc == i or not isinstance(body, If) or body.orelse != Variable(acc):
        return None
    if acc in body.cond.fv_set:
        return None
    cs = _conjuncts(body.cond)
    for k, c in enumerate(cs):
        eq = const_app(c, "==")
        if eq is None:
            continue
        l, r = eq
        if l == Variable(i) and isinstance(r, Variable) and r.name != i:
            j = r.name
        elif r == Variable(i) and isinstance(l, Variable) and l.name != i:
            j = l.name
        else:
            continue
        if j not in ctx.loopvars or j == acc:
            continue
        rest = _conj(cs[:k] + cs[k + 1:])
        out = body.then if rest is None else If(rest, body.then, Variable(acc))
        out = substitute(out, i, Variable(j))
        return Let(acc, a[1], out) if acc in out.fv_set else out
    return None


# --------------------------------------------------------------------------- #
# Conditional

@_rule("if-literal", "Conditional")
def if_literal(e, ctx):
    if isinstance(e, If) and isinstance(e.cond, BoolLit):
        return e.then if e.cond.value else e.orelse
    return None


@_rule("if-same", "Conditional")
def if_same(e, ctx):
    if isinstance(e, If) and alpha_eq(e.then, e.orelse):
        return e.then
    return None


LIFTABLE = SCALAR_CONSTS | {"fst", "snd", "get", "length"}


@_rule("if-lift", "Conditional")
def if_lift(e, ctx):
    """A primitive applied to a conditional moves into both branches."""
    name = const_name(e)
    if name is None or name not in LIFTABLE:
        return None
    head, args = spine(e)
    ifs = [k for k, x in enumerate(args) if isinstance(x, If)]
    if len(ifs) != 1:
        return None
    k = ifs[0]
    if not all(is_trivial(x) for j, x in enumerate(args) if j != k):
        return None
    c = args[k]
    then = app(head, *args[:k], c.then, *args[k + 1:])
    orelse = app(head, *args[:k], c.orelse, *args[k + 1:])
    return If(c.cond, then, orelse)


def _is_index_eq(c: Expr) -> bool:
    eq = const_app(c, "==")
    return eq is not None and all(isinstance(x, Variable) for x in eq)


@_rule("branch-specialize", "Conditional")
def branch_specialize(e, ctx):
    if not isinstance(e, If) or not _is_index_eq(e.cond):
        return None
    l, r = const_app(e.cond, "==")
    flipped = const("==", r, l)
    t, f = e.then, e.orelse
    for target in (e.cond, flipped):
        t = replace_subterm(t, target, BoolLit(True))
        f = replace_subterm(f, target, BoolLit(False))
    if t == e.then and f == e.orelse:
        return None
    return If(e.cond, t, f)


@_rule("orient-eq", "Conditional")
def orient_eq(e, ctx):
    name = const_name(e)
    if name not in ("==", "<>"):
        return None
    l, r = spine(e)[1]
    if not (isinstance(l, Variable) and isinstance(r, Variable)):
        return None
    dl, dr = ctx.var_depth(l.name), ctx.var_depth(r.name)
    if dl < dr or (dl == dr and l.name > r.name):
        return const(name, r, l)
    return None


@_rule("bool-simplify", "Conditional")
def bool_simplify(e, ctx):
    a = const_app(e, "!")
    if a is not None and isinstance(a[0], BoolLit):
        return BoolLit(not a[0].value)
    for op, unit in (("&&", True), ("||", False)):
        a = const_app(e, op)
        if a is None:
            continue
        for x, y in ((a[0], a[1]), (a[1], a[0])):
            if isinstance(x, BoolLit):
                return y if x.value == unit else x
    return None


# --------------------------------------------------------------------------- #
# Loop fission

def _only_projection(e: Expr, a: str, proj: str) -> bool:
    """Every free occurrence of ``a`` in ``e`` is directly under ``proj``."""
    stack = [e]
    while stack:
        t = stack.pop()
        if a not in t.fv_set:
            continue
        if isinstance(t, Variable):
            return False
        args = const_app(t, proj)
        if args is not None and args[0] == Variable(a):
            continue
        if isinstance(t, Abstraction) and t.param == a:
            continue
        if isinstance(t, Let):
            stack.append(t.bound)
            if t.binder != a:
                stack.append(t.body)
            continue
        stack.extend(children(t))
    return True


def _sink_lets(body: Expr, avoid: set) -> Optional[tuple]:
    """Push lets into the components of a pair result; (A, B) or None."""
    if isinstance(body, Let):
        if body.binder in avoid:
            return None
        inner = _sink_lets(body.body, avoid)
        if inner is None:
            return None
        A, B = inner
        if body.binder not in B.fv_set:
            return Let(body.binder, body.bound, A), B
        if body.binder not in A.fv_set:
            return A, Let(body.binder, body.bound, B)
        return None
    p = const_app(body, "pair")
    return (p[0], p[1]) if p is not None else None


@_rule("fission", "Fission")
def fission(e, ctx):
    args = const_app(e, "ifold")
    if args is None:
        return None
    parts = _ifold_lambda(args[0])
    if parts is None:
        return None
    acc, i, body = parts
    if acc == i:
        return None
    split = _sink_lets(body, {acc, i})
    if split is None:
        return None
    A, B = split
    if not (_only_projection(A, acc, "fst") and _only_projection(B, acc, "snd")):
        return None
    z, n = args[1], args[2]
    zp = const_app(z, "pair")
    if zp is None and not is_trivial(z):
        return None
    z1, z2 = (zp[0], zp[1]) if zp is not None else (const("fst", z), const("snd", z))
    a_var = Variable(acc)
    A2 = replace_subterm(A, const("fst", a_var), a_var)
    B2 = replace_subterm(B, const("snd", a_var), a_var)
    f1 = Abstraction(acc, Abstraction(i, A2))
    f2 = Abstraction(acc, Abstraction(i, B2))
    if is_trivial(n):
        return pair(const("ifold", f1, z1, n), const("ifold", f2, z2, n))
    m = fresh_name("n", _names(e))
    return Let(m, n, pair(const("ifold", f1, z1, Variable(m)), const("ifold", f2, z2, Variable(m))))


# --------------------------------------------------------------------------- #
# Loop-invariant code motion

def _worth_hoisting(t: Expr) -> bool:
    if is_trivial(t) or isinstance(t, Abstraction):
        return False
    head, args = spine(t)
    if isinstance(head, Constant):
        if head.name == "build":
            return False
        if len(args) < _arity(head.name):
            return False
    return count_ops(t, 1, NUMERIC_OPS) >= 1


def _arity(name: str) -> int:
    return CONST_ARITY[name]


def _speculable(t: Expr, ctx: Ctx) -> bool:
    """Safe to evaluate even where a branch would not have: Double arithmetic
    without array access or loops (IEEE arithmetic cannot fail)."""
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Constant) and u.name in ("get", "ifold", "build", "length"):
            return False
        if isinstance(u, (Abstraction, Let)):
            return False
        stack.extend(children(u))
    return ctx.type_of(t) == DOUBLE


def _invariant_subterm(t: Expr, bound: frozenset, ctx: Ctx, speculative: bool = False):
    if not (t.fv_set & bound) and _worth_hoisting(t) \
            and (not speculative or _speculable(t, ctx)):
        return t
    if isinstance(t, Let):
        return (_invariant_subterm(t.bound, bound, ctx, speculative)
                or _invariant_subterm(t.body, bound | {t.binder}, ctx, speculative))
    if isinstance(t, If):
        return (_invariant_subterm(t.cond, bound, ctx, speculative)
                or _invariant_subterm(t.then, bound, ctx, True)
                or _invariant_subterm(t.orelse, bound, ctx, True))
    if isinstance(t, Application):
        head, args = spine(t)
        if isinstance(head, Constant):
            for k, a in enumerate(args):
                if head.name == "build" and k == 1 and isinstance(a, Abstraction):
                    found = _invariant_subterm(a.body, bound | {a.param}, ctx, speculative)
                elif head.name == "ifold" and k == 0 and _ifold_lambda(a) is not None:
                    acc, i, body = _ifold_lambda(a)
                    found = _invariant_subterm(body, bound | {acc, i}, ctx, speculative)
                elif isinstance(a, Abstraction):
                    found = None
                else:
                    found = _invariant_subterm(a, bound, ctx, speculative)
                if found is not None:
                    return found
            return None
        if isinstance(t.fun, Abstraction):
            return _invariant_subterm(t.arg, bound, ctx, speculative)
        return (_invariant_subterm(t.fun, bound, ctx, speculative)
                or _invariant_subterm(t.arg, bound, ctx, speculative))
    return None


def _hoist(e: Expr, lam_index: int, params_of, ctx: Ctx) -> Optional[Expr]:
    head, args = spine(e)
    f = args[lam_index]
    params, body, rebuild = params_of(f)
    if params is None:
        return None
    s = _invariant_subterm(body, frozenset(params), ctx)
    if s is None:
        return None
    h = fresh_name("h", _names(e))
    new_body = replace_subterm(body, s, Variable(h))
    new_args = list(args)
    new_args[lam_index] = rebuild(new_body)
    return Let(h, s, app(head, *new_args))


def _build_params(f):
    if isinstance(f, Abstraction):
        return [f.param], f.body, lambda b: Abstraction(f.param, b, f.ty)
    return None, None, None


def _ifold_params(f):
    parts = _ifold_lambda(f)
    if parts is None:
        return None, None, None
    acc, i, body = parts
    return [acc, i], body, lambda b: Abstraction(acc, Abstraction(i, b, f.body.ty), f.ty)


@_rule("licm-build", "LICM")
def licm_build(e, ctx):
    if const_app(e, "build") is None:
        return None
    return _hoist(e, 1, _build_params, ctx)


@_rule("licm-ifold", "LICM")
def licm_ifold(e, ctx):
    if const_app(e, "ifold") is None:
        return None
    return _hoist(e, 0, _ifold_params, ctx)


# --------------------------------------------------------------------------- #
# Array-of-structs to struct-of-arrays (optional)

def _soa_uses_ok(body: Expr, x: str) -> bool:
    stack = [body]
    while stack:
        t = stack.pop()
        if x not in t.fv_set:
            continue
        if isinstance(t, Variable):
            return False
        for proj in ("fst", "snd"):
            a = const_app(t, proj)
            if a is not None:
                g = const_app(a[0], "get")
                if g is not None and g[0] == Variable(x):
                    stack.append(g[1])
                    break
        else:
            a = const_app(t, "length")
            if a is not None and a[0] == Variable(x):
                continue
            if isinstance(t, (Abstraction, Let)) and (getattr(t, "param", None) == x
                                                       or getattr(t, "binder", None) == x):
                if isinstance(t, Let):
                    stack.append(t.bound)
                continue
            stack.extend(children(t))
    return True


def _soa_replace(t: Expr, x: str, x1: str, x2: str) -> Expr:
    if x not in t.fv_set:
        return t
    for proj, target in (("fst", x1), ("snd", x2)):
        a = const_app(t, proj)
        if a is not None:
            g = const_app(a[0], "get")
            if g is not None and g[0] == Variable(x):
                return const("get", Variable(target), _soa_replace(g[1], x, x1, x2))
    a = const_app(t, "length")
    if a is not None and a[0] == Variable(x):
        return const("length", Variable(x1))
    if isinstance(t, Application):
        return Application(_soa_replace(t.fun, x, x1, x2), _soa_replace(t.arg, x, x1, x2))
    if isinstance(t, Abstraction):
        return Abstraction(t.param, _soa_replace(t.body, x, x1, x2), t.ty)
    if isinstance(t, Let):
        return Let(t.binder, _soa_replace(t.bound, x, x1, x2), _soa_replace(t.body, x, x1, x2))
    if isinstance(t, If):
        return If(*(_soa_replace(c, x, x1, x2) for c in (t.cond, t.then, t.orelse)))
    return t


@_rule("soa-split", "SoA")
def soa_split(e, ctx):
    if not isinstance(e, Let):
        return None
    b = const_app(e.bound, "build")
    if b is None or not isinstance(b[1], Abstraction):
        return None
    p = const_app(b[1].body, "pair")
    if p is None or not _soa_uses_ok(e.body, e.binder):
        return None
    avoid = _names(e)
    x1 = fresh_name(e.binder + "1", avoid)
    avoid.add(x1)
    x2 = fresh_name(e.binder + "2", avoid)
    if x1 in e.body.fv_set or x2 in e.body.fv_set:
        return None
    i = b[1].param
    n = b[0]
    first = const("build", n, Abstraction(i, p[0]))
    n2 = n if is_trivial(n) else const("length", Variable(x1))
    second = const("build", n2, Abstraction(i, p[1]))
    return Let(x1, first, Let(x2, second, _soa_replace(e.body, e.binder, x1, x2)))


# --------------------------------------------------------------------------- #
# registry

ALL_RULES = [
    add_zero, sub_zero, zero_sub, mul_one, mul_zero, cancel, distribute, constant_fold, neg_one, neg_neg,
    beta, let_inline, dead_let, let_float, let_let,
    get_build, length_build,
    fst_pair, snd_pair, pair_split,
    ifold_zero, ifold_identity, ifold_peel, single_access,
    if_literal, if_same, if_lift, branch_specialize, orient_eq, bool_simplify,
    fission,
    licm_build, licm_ifold,
    soa_split,
]

RULES = {f.rule.name: f.rule for f in ALL_RULES}


def family(name: str) -> list:
    return [r for r in RULES.values() if r.family == name]
