"""Finite-difference gradient checking."""

import math
import random

import pytest

from dfsm import driver
from dfsm.gradcheck import ShapeMismatch, check_gradient, relative_error


def load(src):
    return driver.load(src)


def test_scalar_check_passes():
    r = check_gradient(load("fun (x: Double) -> sin x * x"), "x", [0.4])
    assert r.passed(1e-6)
    assert r.ad == [pytest.approx(math.cos(0.4) * 0.4 + math.sin(0.4))]
    assert len(r.entries) == 1 and not r.excluded


def test_vector_output_layout():
    r = check_gradient(load("fun (v: Vector) (s: Double) -> vectorSMul v s"), "v", [[1.0, 2.0], 3.0])
    assert r.ad == [[3.0, 0.0], [0.0, 3.0]]
    assert r.passed(1e-6)


def test_matrix_independent():
    r = check_gradient(load("fun (M: Matrix) -> matrixTrace (matrixMul M M)"), "M",
                       [[[1.0, 2.0], [3.0, 4.0]]])
    assert len(r.entries) == 4 and r.passed(1e-6)


def test_pole_within_step_is_excluded():
    x = math.pi / 2 - 1e-7
    r = check_gradient(load("fun (x: Double) -> tan x"), "x", [x])
    assert r.excluded and not r.entries
    assert not r.passed(1e-4)


def test_kink_is_excluded():
    r = check_gradient(load("fun (x: Double) -> if x > 0.0 then x else 0.0 - x"), "x", [1e-8])
    assert [why for _, why in r.excluded] == ["singular point: difference quotient unstable"]


def test_log_of_negative_is_excluded():
    r = check_gradient(load("fun (x: Double) -> log x"), "x", [1e-7])
    assert r.excluded


def test_wrong_derivative_fails():
    prog = load("fun (x: Double) -> x * x")
    wrong = load("fun (x: Double) -> 3.0 * x")
    r = check_gradient(prog, "x", [1.5], derivative=wrong)
    assert not r.passed(1e-4)
    assert r.max_error == pytest.approx(1.5 / 3.0, rel=1e-6)


@pytest.mark.parametrize("src, wrt, args", [
    ("fun (x: Double) -> x", "y", [1.0]),
    ("fun (v: Vector) -> build 2 (fun i -> v)", "v", [[1.0]]),
    ("fun (k: Index) (v: Vector) -> v[k]", "k", [0, [1.0]]),
])
def test_shape_mismatch(src, wrt, args):
    with pytest.raises(ShapeMismatch):
        check_gradient(load(src), wrt, args)


def test_relative_error_floor():
    assert relative_error(1e-9, 0.0) == 1e-9
    assert relative_error(200.0, 100.0) == 1.0


def test_random_polynomials():
    rng = random.Random(0)
    for _ in range(20):
        a, b, c = (rng.uniform(-2, 2) for _ in range(3))
        prog = load(f"fun (x: Double) -> {a!r} * x * x * x + {b!r} * x + {c!r}")
        x = rng.uniform(-2, 2)
        r = check_gradient(prog, "x", [x])
        assert r.passed(1e-6)
        assert r.ad == [pytest.approx(3 * a * x * x + b, rel=1e-12, abs=1e-12)]
