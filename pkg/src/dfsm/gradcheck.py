"""Comparing optimized forward-mode derivatives against central differences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .driver import derivative_program, prepare, signature
from .interp import EvalError, compile_expr
from .syntax import Array, DOUBLE, Expr, Num


class ShapeMismatch(Exception):
    pass


@dataclass
class Entry:
    index: tuple          # (input component..., output component...)
    ad: float
    fd: float
    error: float


@dataclass
class Report:
    max_error: float = 0.0
    entries: list = field(default_factory=list)
    excluded: list = field(default_factory=list)   # (index, reason)
    ad: Any = None                                  # rows = outputs, columns = inputs
    fd: Any = None

    def passed(self, tol: float) -> bool:
        return self.max_error <= tol and bool(self.entries)


# entries agreeing this well are accepted without a second difference quotient
STABLE_AGREEMENT = 1e-6


def relative_error(ad: float, fd: float) -> float:
    return abs(ad - fd) / max(1.0, abs(fd))


def _flat_components(ty, value) -> list:
    """Index tuples of the scalar components of a Double/Vector/Matrix value."""
    if ty == DOUBLE:
        return [()]
    if ty == Array(DOUBLE):
        return [(i,) for i in range(len(value))]
    if ty == Array(Array(DOUBLE)):
        return [(i, j) for i in range(len(value)) for j in range(len(value[i]))]
    raise ShapeMismatch("the independent variable must be a Double, Vector or Matrix")


def _get(value, idx):
    for k in idx:
        value = value[k]
    return value


def _set(value, idx, x):
    """Copy of ``value`` with one component replaced (copies only the path)."""
    if not idx:
        return x
    out = list(value)
    out[idx[0]] = _set(value[idx[0]], idx[1:], x)
    return out


def _outputs(value) -> list:
    """(index, scalar) pairs of a scalar or vector result."""
    if isinstance(value, float) or isinstance(value, int) and not isinstance(value, bool):
        return [((), float(value))]
    if isinstance(value, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                       for x in value):
        return [((j,), float(x)) for j, x in enumerate(value)]
    raise ShapeMismatch("program output must be a scalar or a vector")


def _call(f, args):
    for a in args:
        f = f(a)
    return f


def check_gradient(program: Expr, wrt: str, args: list, h: float = 1e-6,
                   derivative: Optional[Expr] = None) -> Report:
    """Elementwise comparison of AD tangents and central differences.

    Entries where either estimate is not finite or where the program cannot
    be evaluated at the perturbed points are excluded.  When an entry
    disagrees, the difference quotient is recomputed with step h/2; if the two
    quotients disagree with each other the point is a kink or singularity
    within h and the entry is excluded too.  Excluded entries are listed in
    the report.  Differences are taken on the optimized primal program.
    """
    params, _ = signature(program)
    names = [p for p, _ in params]
    if wrt not in names:
        raise ShapeMismatch(f"{wrt!r} is not a parameter")
    k = names.index(wrt)
    xty = params[k][1]
    comps = _flat_components(xty, args[k])
    primal = compile_expr(prepare(program))()
    d = derivative if derivative is not None else derivative_program(program, wrt)
    tangent = _call(compile_expr(d)(), args)
    base = _outputs(_call(primal, args))

    def at(idx, delta):
        a = list(args)
        a[k] = _set(args[k], idx, _get(args[k], idx) + delta)
        return _outputs(_call(primal, a))

    report = Report()
    ad_rows = [[0.0] * len(comps) for _ in base]
    fd_rows = [[0.0] * len(comps) for _ in base]
    for c, idx in enumerate(comps):
        ad_col = _get(tangent, idx)
        ad_out = _outputs(ad_col)
        if len(ad_out) != len(base):
            raise ShapeMismatch("tangent shape differs from the output shape")
        try:
            plus, minus = at(idx, h), at(idx, -h)
        except EvalError as err:
            for (oi, _) in base:
                report.excluded.append((idx + oi, f"evaluation failed: {err}"))
            continue
        half = None
        for o, ((oi, _), (_, p), (_, m), (_, a)) in enumerate(zip(base, plus, minus, ad_out)):
            fd = (p - m) / (2 * h)
            ad_rows[o][c], fd_rows[o][c] = a, fd
            where = idx + oi
            if not (math.isfinite(a) and math.isfinite(fd)):
                report.excluded.append((where, "non-finite derivative"))
                continue
            err = relative_error(a, fd)
            if err > STABLE_AGREEMENT:
                if half is None:
                    try:
                        half = (at(idx, h / 2), at(idx, -h / 2))
                    except EvalError:
                        half = ()
                fd2 = (half[0][o][1] - half[1][o][1]) / h if half else math.nan
                if not math.isfinite(fd2) or relative_error(fd2, fd) > 1e-2:
                    report.excluded.append((where, "singular point: difference quotient unstable"))
                    continue
            report.entries.append(Entry(where, a, fd, err))
            report.max_error = max(report.max_error, err)
    scalar_out = len(base) == 1 and base[0][0] == ()
    report.ad = ad_rows[0] if scalar_out else ad_rows
    report.fd = fd_rows[0] if scalar_out else fd_rows
    return report
