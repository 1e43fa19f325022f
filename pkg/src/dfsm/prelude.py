"""The linear-algebra library, written in the core language itself.

Each definition may refer to earlier ones.  Programs see these names as if
bound by enclosing lets, so a user binding of the same name shadows them.
"""

from __future__ import annotations

from functools import lru_cache

from .parser import parse
from .syntax import Expr, Let

SOURCE = r"""
vectorRange = fun n -> build n (fun i -> i)
vectorFill = fun n e -> build n (fun i -> e)
vectorHot = fun n i -> build n (fun j -> if i == j then 1.0 else 0.0)
vectorMap = fun v f -> build (length v) (fun i -> f v[i])
vectorMap2 = fun v1 v2 f -> build (length v1) (fun i -> f v1[i] v2[i])
vectorZip = fun v1 v2 -> vectorMap2 v1 v2 pair
vectorAdd = fun v1 v2 -> vectorMap2 v1 v2 (+)
vectorEMul = fun v1 v2 -> vectorMap2 v1 v2 (*)
vectorSMul = fun v s -> vectorMap v (fun a -> a * s)
vectorSum = fun v -> ifold (fun s i -> s + v[i]) 0.0 (length v)
vectorDot = fun v1 v2 -> vectorSum (vectorEMul v1 v2)
vectorNorm = fun v -> sqrt (vectorDot v v)
vectorSlice = fun v s e -> build (e - s + 1) (fun i -> v[i + s])
vectorToMatrix = fun v -> build 1 (fun i -> v)
matrixRows = fun m -> length m
matrixCols = fun m -> length m[0]
matrixZeros = fun r c -> build r (fun i -> vectorFill c 0.0)
matrixOnes = fun r c -> build r (fun i -> vectorFill c 1.0)
matrixEye = fun n -> build n (fun i -> vectorHot n i)
matrixHot = fun n m r c -> build n (fun i -> build m (fun j -> if i == r && j == c then 1.0 else 0.0))
matrixMap = fun m f -> build (length m) (fun i -> f m[i])
matrixMap2 = fun m1 m2 f -> build (length m1) (fun i -> f m1[i] m2[i])
matrixAdd = fun m1 m2 -> matrixMap2 m1 m2 vectorAdd
matrixTranspose = fun m -> build (matrixCols m) (fun i -> build (matrixRows m) (fun j -> m[j][i]))
matrixMul = fun m1 m2 -> let m2T = matrixTranspose m2 in build (matrixRows m1) (fun i -> build (matrixCols m2) (fun j -> vectorDot m1[i] m2T[j]))
matrixTrace = fun m -> ifold (fun s i -> s + m[i][i]) 0.0 (length m)
vectorOutProd = fun v1 v2 -> let m1 = vectorToMatrix v1 in let m2 = vectorToMatrix v2 in let m1T = matrixTranspose m1 in matrixMul m1T m2
vectorZeros = fun n -> vectorFill n 0.0
matrixZip = fun m1 m2 -> build (length m1) (fun i -> vectorZip m1[i] m2[i])
"""

# helpers that derivative expansion relies on but the core library omits
EXTRAS = ("vectorZeros", "matrixZip")


class UnknownPrelude(KeyError):
    pass


@lru_cache(maxsize=None)
def _table() -> tuple:
    out = []
    for line in SOURCE.strip().splitlines():
        name, src = line.split("=", 1)
        out.append((name.strip(), parse(src)))
    return tuple(out)


def definitions() -> dict:
    """Ordered name -> definition map."""
    return dict(_table())


def names() -> list[str]:
    return [n for n, _ in _table()]


def lookup(name: str) -> Expr:
    d = definitions()
    if name not in d:
        raise UnknownPrelude(name)
    return d[name]


def extras() -> dict:
    d = definitions()
    return {n: d[n] for n in EXTRAS}


def dependencies(e: Expr) -> list[str]:
    """Prelude names needed by ``e``, transitively, in definition order."""
    d = definitions()
    need = {n for n in e.fvs if n in d}
    for name in reversed(names()):
        if name in need:
            need |= {n for n in d[name].fvs if n in d}
    return [n for n in names() if n in need]


def with_prelude(e: Expr) -> Expr:
    """Wrap ``e`` in lets binding the prelude definitions it refers to."""
    d = definitions()
    for name in reversed(dependencies(e)):
        e = Let(name, d[name], e)
    return e
