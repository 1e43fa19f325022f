"""Interpreter semantics, counters, and the linear-algebra library."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfsm import parse
from dfsm.interp import EvalError, IndexOutOfBounds, apply_value, eval_counted, evaluate
from dfsm.prelude import (
    UnknownPrelude, definitions, dependencies, extras, lookup, names, with_prelude,
)
from dfsm.syntax import alpha_eq

FIG_NAMES = [
    "vectorRange", "vectorFill", "vectorHot", "vectorMap", "vectorMap2", "vectorZip", "vectorAdd",
    "vectorEMul", "vectorSMul", "vectorSum", "vectorDot", "vectorNorm", "vectorSlice",
    "vectorToMatrix", "vectorOutProd", "matrixRows", "matrixCols", "matrixZeros", "matrixOnes",
    "matrixEye", "matrixHot", "matrixMap", "matrixMap2", "matrixAdd", "matrixTranspose",
    "matrixMul", "matrixTrace",
]

small = st.integers(1, 8)
floats = st.floats(-10, 10, allow_nan=False)


def run(src, *args):
    return apply_value(evaluate(parse(src)), *args)


def rand_matrix(rng, r, c):
    return [[rng.uniform(-1, 1) for _ in range(c)] for _ in range(r)]


# -- interpreter

def test_scalar_semantics():
    assert evaluate(parse("1.5 * 2.0 + 1.0")) == 4.0
    assert evaluate(parse("if 2.0 > 1.0 then 1.0 else 0.0")) == 1.0
    assert evaluate(parse("fst (1.0, 2.0) + snd (1.0, 2.0)")) == 3.0
    assert evaluate(parse("let x = 3.0 in (fun y -> x * y) 2.0")) == 6.0


def test_ieee_division():
    assert evaluate(parse("1.0 / 0.0")) == math.inf
    assert math.isnan(evaluate(parse("0.0 / 0.0")))
    assert math.isnan(evaluate(parse("log (0.0 - 1.0)")))


def test_arrays():
    assert evaluate(parse("build 3 (fun i -> i)")) == [0, 1, 2]
    assert evaluate(parse("ifold (fun s i -> s + 1.0) 0.0 5")) == 5.0
    assert evaluate(parse("length (build 4 (fun i -> 0.0))")) == 4


def test_index_out_of_bounds():
    with pytest.raises(IndexOutOfBounds):
        run("fun (v: Vector) -> v[3]", [1.0, 2.0, 3.0])


def test_integer_division_by_zero():
    with pytest.raises(EvalError):
        evaluate(parse("3 / 0"))


def test_call_by_value_let():
    # an erroring binding is evaluated even when unused
    with pytest.raises(IndexOutOfBounds):
        run("fun (v: Vector) -> let z = v[5] in 1.0", [1.0])


def test_counters_are_deterministic():
    e = parse("fun (v: Vector) -> build (length v) (fun i -> v[i] * 2.0 + 1.0)")
    counts = []
    for _ in range(2):
        f, c = eval_counted(e)
        f([1.0, 2.0, 3.0])
        counts.append(c)
    assert counts[0] == counts[1]
    assert counts[0].scalar_ops == 6
    assert counts[0].array_allocs == 1
    assert counts[0].elem_writes == 3


def test_closures_capture_values():
    f = run("fun (x: Double) -> fun y -> x + y", 1.0)
    assert f(2.0) == 3.0 and f(5.0) == 6.0


# -- library

def test_library_names():
    assert set(FIG_NAMES) <= set(names())
    assert set(extras()) == {"vectorZeros", "matrixZip"}


def test_lookup_and_unknown():
    assert alpha_eq(lookup("vectorDot"), parse("fun v1 v2 -> vectorSum (vectorEMul v1 v2)"))
    assert alpha_eq(lookup("matrixEye"), parse("fun n -> build n (fun i -> vectorHot n i)"))
    with pytest.raises(UnknownPrelude):
        lookup("matrixDeterminant")


def test_definitions_only_refer_backwards():
    seen = set()
    defs = definitions()
    for name in names():
        assert {v for v in defs[name].fvs if v in defs} <= seen
        seen.add(name)


def test_dependencies_are_transitive():
    deps = dependencies(parse("vectorNorm v"))
    assert deps == ["vectorMap2", "vectorEMul", "vectorSum", "vectorDot", "vectorNorm"]
    assert with_prelude(parse("x")) == parse("x")


def test_small_definitions():
    assert run("vectorHot", 3, 1) == [0.0, 1.0, 0.0]
    assert run("vectorZeros", 2) == [0.0, 0.0]
    assert run("matrixZip", [[1.0]], [[2.0]]) == [[(1.0, 2.0)]]
    assert run("matrixHot", 2, 2, 0, 1) == [[0.0, 1.0], [0.0, 0.0]]
    assert run("vectorSlice", [1.0, 2.0, 3.0, 4.0], 1, 2) == [2.0, 3.0]
    assert run("vectorRange", 3) == [0, 1, 2]
    assert run("matrixEye", 2) == [[1.0, 0.0], [0.0, 1.0]]


@settings(max_examples=40, deadline=None)
@given(small, small, small, st.integers(0, 2 ** 32))
def test_matrix_mul_matches_numpy(r, k, c, seed):
    rng = random.Random(seed)
    A, B = rand_matrix(rng, r, k), rand_matrix(rng, k, c)
    got = np.array(run("matrixMul", A, B))
    assert got.shape == (r, c)
    assert np.allclose(got, np.array(A) @ np.array(B), rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(small, small, st.integers(0, 2 ** 32))
def test_transpose_is_an_involution(r, c, seed):
    A = rand_matrix(random.Random(seed), r, c)
    assert run("fun (m: Matrix) -> matrixTranspose (matrixTranspose m)", A) == A


@settings(max_examples=60, deadline=None)
@given(st.lists(floats, min_size=1, max_size=16).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(floats, min_size=len(a), max_size=len(a)))))
def test_dot_is_symmetric(vs):
    a, b = vs
    assert run("vectorDot", a, b) == run("vectorDot", b, a)


@settings(max_examples=40, deadline=None)
@given(small, small, st.integers(0, 2 ** 32))
def test_outer_product_shape(n, m, seed):
    rng = random.Random(seed)
    u = [rng.uniform(-1, 1) for _ in range(n)]
    v = [rng.uniform(-1, 1) for _ in range(m)]
    got = np.array(run("vectorOutProd", u, v))
    assert got.shape == (n, m)
    assert np.array_equal(got, np.outer(u, v))


def test_trace_and_norm():
    assert run("matrixTrace", [[1.0, 2.0], [3.0, 4.0]]) == 5.0
    assert run("vectorNorm", [3.0, 4.0]) == 5.0
