"""Pretty printer for terms and types.

The output re-parses to an alpha-equivalent term.  Nested lets are laid out
one binding per line.
"""

from __future__ import annotations

import math

from .syntax import (
    Abstraction, Application, Array, BoolLit, BoolT, CardLit, Constant, Expr, Fun,
    If, IndexLit, Let, Macro, Num, PairT, ScalarLit, Ty, Variable, CONST_ARITY,
    spine, TYPE_NAMES,
)

_TYPE_ABBREV = {t: n for n, t in TYPE_NAMES.items()}

# precedence levels, loosest first
P_EXPR, P_OR, P_AND, P_CMP, P_ADD, P_MUL, P_UNARY, P_POW, P_APP, P_ATOM = range(10)

_BINOP = {
    "||": (P_OR, "||"), "&&": (P_AND, "&&"),
    ">": (P_CMP, ">"), "<": (P_CMP, "<"), "==": (P_CMP, "=="), "<>": (P_CMP, "<>"),
    "+": (P_ADD, "+"), "-": (P_ADD, "-"),
    "*": (P_MUL, "*"), "/": (P_MUL, "/"),
}

_SECTION = {"+", "-", "*", "/", "**", ">", "<", "==", "<>", "&&", "||", "!"}


def show_type(t: Ty) -> str:
    return _show_type(t, False)


def _show_type(t: Ty, atom: bool) -> str:
    if t in _TYPE_ABBREV:
        return _TYPE_ABBREV[t]
    if isinstance(t, Num):
        return "Card" if t.kind == "Int" else t.kind
    if isinstance(t, BoolT):
        return "Bool"
    if isinstance(t, Array):
        s = "Array " + _show_type(t.elem, True)
        return f"({s})" if atom else s
    if isinstance(t, PairT):
        return f"({_show_type(t.left, False)}, {_show_type(t.right, False)})"
    if isinstance(t, Fun):
        s = f"{_show_type(t.frm, True)} => {_show_type(t.to, False)}"
        return f"({s})" if atom else s
    return repr(t)


def pretty(e: Expr) -> str:
    return _pp(e, P_EXPR, 0)


def _float(x: float) -> str:
    if math.isnan(x):
        return "(0.0 / 0.0)"
    if math.isinf(x):
        return "(1.0 / 0.0)" if x > 0 else "(-1.0 / 0.0)"
    s = repr(x)
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def _wrap(s: str, level: int, prec: int) -> str:
    return f"({s})" if level < prec else s


def _pp(e: Expr, prec: int, ind: int) -> str:
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, ScalarLit):
        s = _float(e.value)
        return _wrap(s, P_UNARY, prec) if s.startswith("-") else s
    if isinstance(e, CardLit):
        return str(e.value)
    if isinstance(e, IndexLit):
        return f"{e.value}i"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Constant):
        return f"({e.name})" if e.name in _SECTION else e.name
    if isinstance(e, Let):
        pad = " " * ind
        s = f"let {e.binder} = {_pp(e.bound, P_EXPR, ind + 2)} in\n{pad}{_pp(e.body, P_EXPR, ind)}"
        return _wrap(s, P_EXPR, prec)
    if isinstance(e, If):
        s = (f"if {_pp(e.cond, P_EXPR, ind)} then {_pp(e.then, P_EXPR, ind + 2)} "
             f"else {_pp(e.orelse, P_EXPR, ind + 2)}")
        return _wrap(s, P_EXPR, prec)
    if isinstance(e, Abstraction):
        params = []
        body: Expr = e
        while isinstance(body, Abstraction):
            params.append(f"({body.param}: {show_type(body.ty)})" if body.ty is not None else body.param)
            body = body.body
        if isinstance(body, Let):
            s = f"fun {' '.join(params)} ->\n{' ' * (ind + 2)}{_pp(body, P_EXPR, ind + 2)}"
        else:
            s = f"fun {' '.join(params)} -> {_pp(body, P_EXPR, ind)}"
        return _wrap(s, P_EXPR, prec)
    if isinstance(e, Macro):
        if e.kind == "deriv":
            s = f"deriv {_pp(e.args[0], P_ATOM, ind)} {e.args[1].name}"
        else:
            s = f"{e.kind} {_pp(e.args[0], P_ATOM, ind)}"
        return _wrap(s, P_APP, prec)
    if isinstance(e, Application):
        return _pp_app(e, prec, ind)
    raise TypeError(f"not a term: {e!r}")


def _pp_app(e: Expr, prec: int, ind: int) -> str:
    head, args = spine(e)
    if isinstance(head, Constant) and len(args) == CONST_ARITY[head.name]:
        name = head.name
        if name in _BINOP:
            level, op = _BINOP[name]
            # comparisons are non-associative; the others are left-associative
            lhs_prec = level + 1 if level == P_CMP else level
            s = f"{_pp(args[0], lhs_prec, ind)} {op} {_pp(args[1], level + 1, ind)}"
            return _wrap(s, level, prec)
        if name == "**":
            s = f"{_pp(args[0], P_APP, ind)} ** {_pp(args[1], P_UNARY, ind)}"
            return _wrap(s, P_POW, prec)
        if name == "neg" or name == "!":
            a = args[0]
            sym = "-" if name == "neg" else "!"
            inner = _pp(a, P_UNARY, ind)
            # "-1.0" would read back as a literal; "--x" reads fine but looks odd
            if name == "neg" and (isinstance(a, ScalarLit) or inner.startswith("-")):
                inner = f"({_pp(a, P_EXPR, ind)})"
            return _wrap(sym + inner, P_UNARY, prec)
        if name == "get":
            s = f"{_pp(args[0], P_ATOM, ind)}[{_pp(args[1], P_EXPR, ind)}]"
            return s
        if name == "pair":
            return f"({_pp(args[0], P_EXPR, ind)}, {_pp(args[1], P_EXPR, ind)})"
    parts = [_pp(head, P_APP if not isinstance(head, Macro) else P_ATOM, ind)]
    parts += [_pp(a, P_ATOM, ind) for a in args]
    return _wrap(" ".join(parts), P_APP, prec)
