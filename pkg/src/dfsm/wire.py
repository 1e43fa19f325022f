"""Plain-text value format shared by the CLI and the C harness.

Whitespace-separated decimals.  A vector is ``n v1 ... vn``, a matrix
``r c a11 ... arc`` in row-major order, a pair is its two components in
order, a boolean is 0 or 1.  Doubles are written with 17 significant digits.
"""

from __future__ import annotations

from typing import Any, Iterator

from .syntax import Array, BoolT, Num, PairT, Ty, DOUBLE


class WireError(ValueError):
    pass


def _rank(ty: Ty) -> int:
    r = 0
    while isinstance(ty, Array):
        ty, r = ty.elem, r + 1
    return r


def _base(ty: Ty) -> Ty:
    while isinstance(ty, Array):
        ty = ty.elem
    return ty


def format_double(x: float) -> str:
    return "%.17g" % x


def tokens_of(value: Any, ty: Ty) -> list:
    if ty == DOUBLE:
        return [format_double(float(value))]
    if isinstance(ty, Num):
        return [str(int(value))]
    if isinstance(ty, BoolT):
        return ["1" if value else "0"]
    if isinstance(ty, PairT):
        return tokens_of(value[0], ty.left) + tokens_of(value[1], ty.right)
    if isinstance(ty, Array):
        rank = _rank(ty)
        el = _base(ty)
        if rank == 1:
            out = [str(len(value))]
            for v in value:
                out += tokens_of(v, el)
            return out
        if rank == 2:
            rows = len(value)
            cols = len(value[0]) if rows else 0
            if any(len(r) != cols for r in value):
                raise WireError("ragged matrix")
            out = [str(rows), str(cols)]
            for r in value:
                for v in r:
                    out += tokens_of(v, el)
            return out
    raise WireError(f"no wire form for values of this type")


def format_value(value: Any, ty: Ty) -> str:
    return " ".join(tokens_of(value, ty))


def _next(it: Iterator[str]) -> str:
    try:
        return next(it)
    except StopIteration:
        raise WireError("unexpected end of input") from None


def _count(it) -> int:
    tok = _next(it)
    try:
        n = int(tok)
    except ValueError:
        raise WireError(f"expected a size, found {tok!r}") from None
    if n < 0:
        raise WireError(f"negative size {n}")
    return n


def read_value(it: Iterator[str], ty: Ty) -> Any:
    if ty == DOUBLE:
        tok = _next(it)
        try:
            return float(tok)
        except ValueError:
            raise WireError(f"expected a number, found {tok!r}") from None
    if isinstance(ty, Num):
        return _count(it)
    if isinstance(ty, BoolT):
        tok = _next(it)
        if tok not in ("0", "1"):
            raise WireError(f"expected 0 or 1, found {tok!r}")
        return tok == "1"
    if isinstance(ty, PairT):
        a = read_value(it, ty.left)
        return (a, read_value(it, ty.right))
    if isinstance(ty, Array):
        rank = _rank(ty)
        el = _base(ty)
        if rank == 1:
            return [read_value(it, el) for _ in range(_count(it))]
        if rank == 2:
            r, c = _count(it), _count(it)
            return [[read_value(it, el) for _ in range(c)] for _ in range(r)]
    raise WireError("no wire form for values of this type")


def read_values(text: str, types: list) -> list:
    """Read one value per type; the text must hold exactly that much."""
    it = iter(text.split())
    out = [read_value(it, t) for t in types]
    rest = next(it, None)
    if rest is not None:
        raise WireError(f"trailing input {rest!r}")
    return out


class _Tokens:
    """Iterator over tokens that knows whether any are left."""

    def __init__(self, toks: list):
        self.toks = toks
        self.pos = 0

    def __iter__(self):
        return self

    def __next__(self) -> str:
        if self.pos >= len(self.toks):
            raise StopIteration
        self.pos += 1
        return self.toks[self.pos - 1]

    @property
    def done(self) -> bool:
        return self.pos >= len(self.toks)


def read_records(text: str, types: list) -> list:
    """Read repeated argument records until the input runs out."""
    it = _Tokens(text.split())
    records = []
    while not it.done:
        records.append([read_value(it, t) for t in types])
    return records
