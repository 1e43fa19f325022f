"""C emission and the compiled harness."""

import random
import re
import subprocess

import pytest

from conftest import needs_gcc
from dfsm import driver, parse
from dfsm.codegen import (
    CodegenError, ResidualHigherOrder, UnsupportedShape, compile_function, emit_c, emit_harness,
)
from dfsm.interp import apply_value, evaluate
from dfsm.kernels import KERNELS, uniform_matrix, uniform_vector
from dfsm.wire import format_value, read_values

HEAP = re.compile(r"\b(malloc|calloc|realloc|free|alloca)\s*\(")


def body_of(c_text: str, name: str) -> str:
    return c_text[c_text.index(f"{name}("):]


def test_scalar_identity_signature():
    src = compile_function("f", driver.load("fun (x: Double) -> x")).source
    assert src.startswith("double f(double x)")
    assert "return x;" in src


def test_vector_sum_is_one_loop_without_storage():
    t = compile_function("vs", driver.prepare(driver.load("fun (v: Vector) -> vectorSum v")))
    assert not t.uses_storage
    assert t.source.count("for (") == 1
    assert "dfsm_alloc" not in t.source


def test_array_result_takes_destination():
    t = compile_function("sm", driver.prepare(driver.load("fun (v: Vector) (s: Double) -> vectorSMul v s")))
    assert t.uses_storage
    assert t.source.startswith("vector sm(storage s, vector v, double")


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_derivatives_never_touch_the_heap(name):
    k = KERNELS[name]
    text = emit_c("k", driver.derivative_program(k.program, k.wrt))
    assert HEAP.search(body_of(text, "k")) is None


def test_emission_is_deterministic():
    k = KERNELS["lse"]
    d = driver.derivative_program(k.program, k.wrt)
    assert emit_c("k", d) == emit_c("k", d)


def test_matrix_result_layout():
    d = driver.derivative_program(driver.load("fun (M: Matrix) -> matrixTrace M"), "M")
    src = compile_function("tr", d).source
    assert "res->rows" in src and "res->cols" in src


@pytest.mark.parametrize("src, err", [
    ("fun (f: Double => Double) (x: Double) -> f x", ResidualHigherOrder),
    ("fun (x: Double) -> let f = fun (y: Double) -> x + y in f", ResidualHigherOrder),
    ("fun (v: Vector) -> let f = fun (y: Double) -> y in vectorMap v f", ResidualHigherOrder),
    ("fun (v: Vector) -> build (length v) (fun i -> build 2 (fun j -> build 2 (fun k -> v[i])))",
     UnsupportedShape),
    ("fun x -> x", UnsupportedShape),
])
def test_unsupported_programs(src, err):
    with pytest.raises(err):
        compile_function("g", parse(src))


def test_bad_function_name():
    with pytest.raises(CodegenError):
        compile_function("int", driver.load("fun (x: Double) -> x"))


def test_harness_requires_kernels():
    with pytest.raises(CodegenError):
        emit_harness([])


# -- compiled behaviour

def _run(e, records):
    params, body = driver.signature(e)
    exe = driver.build_harness([("k", e)])
    text = "\n".join(" ".join(format_value(v, t) for v, (_, t) in zip(r, params)) for r in records)
    return driver.run_harness(exe, text).strip().split("\n")


@needs_gcc
def test_vector_sum_agrees_with_interpreter():
    e = driver.prepare(driver.load("fun (v: Vector) -> vectorSum v"))
    rng = random.Random(1)
    recs = [[uniform_vector(rng.randint(0, 9), rng)] for _ in range(10)]
    out = _run(e, recs)
    f = evaluate(e)
    assert len(out) == len(recs)
    for r, line in zip(recs, out):
        assert float(line) == f(*r)


@needs_gcc
def test_pair_and_index_results():
    e = driver.load("fun (v: Vector) (k: Index) -> (v[k], k)")
    params, body = driver.signature(e)
    out = _run(e, [[[1.5, 2.5], 1]])
    assert out[0].split() == ["2.5", "1"]


@needs_gcc
def test_harness_rejects_malformed_input(tmp_path):
    e = driver.prepare(driver.load("fun (v: Vector) -> vectorSum v"))
    exe = driver.build_harness([("k", e)], str(tmp_path))
    proc = subprocess.run([exe], input="3 1.0 x 2.0", capture_output=True, text=True)
    assert proc.returncode == 2
    assert "malformed" in proc.stderr


@needs_gcc
def test_two_kernels_read_in_turn(tmp_path):
    a = driver.prepare(driver.load("fun (v: Vector) -> vectorSum v"))
    b = driver.prepare(driver.load("fun (v: Vector) -> vectorNorm v"))
    exe = driver.build_harness([("a", a), ("b", b)], str(tmp_path))
    out = driver.run_harness(exe, "2 3 4 2 3 4\n1 -2 1 -2\n")
    assert [float(x) for x in out.split()] == [7.0, 5.0, -2.0, 2.0]


@needs_gcc
def test_generated_code_links_without_malloc(tmp_path):
    # any allocator call in a kernel makes the process abort
    k = KERNELS["nnmf"]
    d = driver.derivative_program(k.program, k.wrt)
    t = compile_function("k", d)
    src = emit_harness([t]) + "\nvoid *__wrap_malloc(size_t n) { (void)n; abort(); }\n"
    path = tmp_path / "h.c"
    path.write_text(src)
    exe = tmp_path / "h"
    cc = driver.gcc_path()
    proc = subprocess.run([cc, "-O2", "-std=c99", "-o", str(exe), str(path), "-lm"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    W, H, A = k.inputs(4, random.Random(2))
    params, _ = driver.signature(d)
    text = " ".join(format_value(v, ty) for v, (_, ty) in zip([W, H, A], params))
    run = subprocess.run([str(exe)], input=text, capture_output=True, text=True)
    assert run.returncode == 0
    got = read_values(run.stdout, [params[1][1]])[0]
    want = apply_value(evaluate(d), W, H, A)
    assert all(abs(g - w) <= 1e-12 * max(1.0, abs(w)) for gr, wr in zip(got, want) for g, w in zip(gr, wr))


@needs_gcc
def test_empty_and_single_element_arrays():
    e = driver.derivative_program(driver.load("fun (v1: Vector) (v2: Vector) -> vectorDot v1 v2"), "v1")
    out = _run(e, [[[], []], [[2.0], [3.0]]])
    assert [line.split() for line in out] == [["0"], ["1", "3"]]


@needs_gcc
def test_nonsquare_outer_product():
    src = ("fun (u: Vector) (M: Matrix) (v: Vector) -> let m = matrixMul (vectorToMatrix u) "
           "(matrixMul M (matrixTranspose (vectorToMatrix v))) in m[0][0]")
    d = driver.derivative_program(driver.load(src), "M")
    rng = random.Random(5)
    u, M, v = uniform_vector(2, rng), uniform_matrix(2, 3, rng), uniform_vector(3, rng)
    params, _ = driver.signature(d)
    got = read_values(_run(d, [[u, M, v]])[0], [params[1][1]])[0]
    assert got == [[a * b for b in v] for a in u]
