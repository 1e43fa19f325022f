"""Syntax utilities, parser, printer and type checker."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from dfsm import ParseError, alpha_eq, parse, parse_type, pretty, show_type
from dfsm.syntax import (
    Abstraction, Application, CardLit, DOUBLE, DOUBLE_D, Fun, INDEX, IndexLit, MATRIX, ScalarLit,
    VECTOR, Variable, BOOL, CARD, const, free_vars, fresh_name, substitute, uniquify, binders,
)
from dfsm.typecheck import TypeError as FTypeError, UnboundVariable, dual_type, typecheck

from termgen import ENV_TYPES, TermGen

terms = st.integers(0, 2 ** 32).map(lambda s: TermGen(random.Random(s))).map(
    lambda g: g.gen(g.ty(), 4))


# -- syntax

def test_free_vars_respects_binders():
    e = parse("fun x -> let y = x + z in y * w")
    assert set(free_vars(e)) == {"z", "w"}


def test_substitute_avoids_capture():
    e = parse("fun y -> x + y")
    out = substitute(e, "x", Variable("y"))
    assert isinstance(out, Abstraction) and out.param != "y"
    assert "y" in free_vars(out)
    assert alpha_eq(out, parse("fun q -> y + q"))


def test_alpha_eq_distinguishes_binding_structure():
    assert alpha_eq(parse("fun a b -> a"), parse("fun x y -> x"))
    assert not alpha_eq(parse("fun a b -> a"), parse("fun x y -> y"))
    assert not alpha_eq(parse("fun a -> z"), parse("fun a -> w"))


def test_fresh_name_avoids_set():
    assert fresh_name("i", {"i", "i1", "i2"}) not in {"i", "i1", "i2"}


@settings(max_examples=100, deadline=None)
@given(terms)
def test_uniquify_gives_distinct_binders(e):
    u = uniquify(e)
    assert alpha_eq(u, e)
    bs = binders(u)
    assert len(bs) == len(set(bs))


# -- parser and printer

def test_parse_precedence():
    assert parse("a + b * c") == const("+", Variable("a"), const("*", Variable("b"), Variable("c")))
    assert parse("f x y") == Application(Application(Variable("f"), Variable("x")), Variable("y"))
    assert parse("v[i][j]") == const("get", const("get", Variable("v"), Variable("i")), Variable("j"))


def test_parse_literals():
    assert parse("3") == CardLit(3)
    assert parse("3i") == IndexLit(3)
    assert parse("2.5") == ScalarLit(2.5)
    assert parse("-1.0") == ScalarLit(-1.0)


def test_parse_sections_and_pairs():
    assert parse("(+)") == const("+")
    assert parse("(a, b)") == const("pair", Variable("a"), Variable("b"))


def test_parse_annotations():
    e = parse("fun (v: Vector) (s: Double) -> v")
    assert e.ty == VECTOR and e.body.ty == DOUBLE
    assert parse_type("Double => Vector") == Fun(DOUBLE, VECTOR)
    assert parse_type("(Double, Index)") == type(DOUBLE_D)(DOUBLE, INDEX)


@pytest.mark.parametrize("src, pos", [("let x = in x", (1, 9)), ("fun -> x", (1, 5)), ("a +\n  )", (2, 3)),
                                      ("x @ y", (1, 3)), ("(a, b", (1, 6))])
def test_parse_errors_report_position(src, pos):
    with pytest.raises(ParseError) as info:
        parse(src)
    if pos is not None:
        assert info.value.position == pos


def test_comments_are_ignored():
    assert parse("x // trailing\n + y") == parse("x + y")


@settings(max_examples=300, deadline=None)
@given(terms)
def test_print_parse_roundtrip(e):
    assert alpha_eq(parse(pretty(e)), e)


def test_show_type():
    assert show_type(MATRIX) == "Matrix"
    assert parse_type(show_type(Fun(VECTOR, Fun(DOUBLE, DOUBLE_D)))) == Fun(VECTOR, Fun(DOUBLE, DOUBLE_D))


# -- type checker

@pytest.mark.parametrize("src, ty", [
    ("fun (x: Double) -> x * 2.0", Fun(DOUBLE, DOUBLE)),
    ("fun (v: Vector) -> build (length v) (fun i -> v[i])", Fun(VECTOR, VECTOR)),
    ("fun (v: Vector) -> ifold (fun s i -> s + v[i]) 0.0 (length v)", Fun(VECTOR, DOUBLE)),
    ("fun (M: Matrix) -> M[0][1]", Fun(MATRIX, DOUBLE)),
    ("fun (x: Double) -> (x, x)", Fun(DOUBLE, DOUBLE_D)),
    ("fun (n: Card) -> matrixEye n", Fun(CARD, MATRIX)),
    ("fun (v: Vector) (w: Vector) -> vectorDot v w", Fun(VECTOR, Fun(VECTOR, DOUBLE))),
    ("fun (a: Double) -> a > 0.0 && true", Fun(DOUBLE, BOOL)),
])
def test_typecheck_examples(src, ty):
    assert typecheck({}, parse(src)) == ty


@pytest.mark.parametrize("src", [
    "fun (x: Double) -> x[0]",
    "fun (v: Vector) -> v + 1.0",
    "fun (x: Double) -> if x then 1.0 else 2.0",
    "fun (x: Double) -> if true then x else (x, x)",
    "fun (v: Vector) -> build 3 (fun i -> i) + v",
])
def test_typecheck_rejects(src):
    with pytest.raises(FTypeError):
        typecheck({}, parse(src))


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        typecheck({}, parse("fun (x: Double) -> y"))


def test_user_binding_shadows_library():
    assert typecheck({}, parse("let vectorSum = 1.0 in vectorSum")) == DOUBLE


def test_dual_type():
    assert dual_type(VECTOR) == type(VECTOR)(DOUBLE_D)
    assert dual_type(Fun(DOUBLE, BOOL)) == Fun(DOUBLE_D, BOOL)


@settings(max_examples=200, deadline=None)
@given(terms)
def test_generated_terms_typecheck(e):
    typecheck(dict(ENV_TYPES), e)
