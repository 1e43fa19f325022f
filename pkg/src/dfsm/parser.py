"""Concrete ML-style surface syntax.

    fun (v: Vector) s -> e        nested abstractions, optional annotations
    let x = e1 in e2
    if c then a else b
    e0[e1]                        get
    (e1, e2)                      pair
    a + b, a == b, a && b, -a     infix/prefix constants; (+) is a section
    deriv e x, diff f, grad f     differentiation macros

``//`` starts a line comment.  Integer literals are cardinalities unless
context says otherwise (the checker lets them stand for indices too);
``3i`` is an explicit index literal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    Abstraction, Application, Array, BoolLit, CardLit, Constant, Expr, Fun,
    If, IndexLit, Let, Macro, MACRO_KINDS, PairT, ScalarLit, Ty, TYPE_NAMES, Variable,
    const,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message

    @property
    def position(self) -> tuple[int, int]:
        return (self.line, self.col)


KEYWORDS = {"fun", "let", "in", "if", "then", "else", "true", "false", *MACRO_KINDS}

NAMED_CONSTANTS = {
    "neg", "sin", "cos", "tan", "log", "exp", "sqrt",
    "build", "ifold", "get", "length", "pair", "fst", "snd",
}

# operator token -> constant name, for sections like (+)
SECTIONS = {
    "+": "+", "-": "-", "*": "*", "/": "/", "**": "**",
    ">": ">", "<": "<", "==": "==", "=": "==", "<>": "<>",
    "&&": "&&", "||": "||", "!": "!",
}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<float>\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<index>\d+i)(?![A-Za-z0-9_$'])
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$']*)
  | (?P<op>->|=>|\*\*|==|<>|&&|\|\||[-+*/<>=!()\[\],:])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            text = m.group()
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def error(self, msg: str):
        raise ParseError(self.tok.line, self.tok.col, msg)

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in NAMED_CONSTANTS:
            self.error(f"expected a variable name, found {t.text or 'end of input'!r}")
        self.advance()
        return t.text

    # -- entry
    def parse_program(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    # -- expressions
    def expr(self) -> Expr:
        if self.at("fun"):
            return self.lambda_()
        if self.at("let"):
            self.advance()
            x = self.ident()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            return Let(x, bound, self.expr())
        if self.at("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            return If(c, a, self.expr())
        return self.or_()

    def lambda_(self) -> Expr:
        self.expect("fun")
        params = []
        while not self.at("->"):
            if self.at("("):
                self.advance()
                x = self.ident()
                self.expect(":")
                t = self.type_()
                self.expect(")")
                params.append((x, t))
            else:
                params.append((self.ident(), None))
        if not params:
            self.error("lambda needs at least one parameter")
        self.expect("->")
        body = self.expr()
        for x, t in reversed(params):
            body = Abstraction(x, body, t)
        return body

    def _binary(self, sub, ops: dict) -> Expr:
        lhs = sub()
        while self.tok.kind == "op" and self.tok.text in ops:
            op = ops[self.advance().text]
            lhs = const(op, lhs, sub())
        return lhs

    def or_(self) -> Expr:
        return self._binary(self.and_, {"||": "||"})

    def and_(self) -> Expr:
        return self._binary(self.cmp, {"&&": "&&"})

    def cmp(self) -> Expr:
        lhs = self.add()
        ops = {">": ">", "<": "<", "==": "==", "=": "==", "<>": "<>"}
        if self.tok.kind == "op" and self.tok.text in ops:
            op = ops[self.advance().text]
            return const(op, lhs, self.add())
        return lhs

    def add(self) -> Expr:
        return self._binary(self.mul, {"+": "+", "-": "-"})

    def mul(self) -> Expr:
        return self._binary(self.unary, {"*": "*", "/": "/"})

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            t = self.tok
            if t.kind == "float" and not (self.peek().kind == "op" and self.peek().text in ("**", "[")):
                self.advance()
                return ScalarLit(-float(t.text))
            return const("neg", self.unary())
        if self.at("!"):
            self.advance()
            return const("!", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.application()
        if self.at("**"):
            self.advance()
            return const("**", base, self.unary())
        return base

    def application(self) -> Expr:
        if self.tok.kind == "kw" and self.tok.text in MACRO_KINDS:
            head = self.macro()
        else:
            head = self.postfix()
        while self.starts_atom():
            head = Application(head, self.postfix())
        return head

    def macro(self) -> Expr:
        kind = self.advance().text
        if kind == "deriv":
            e = self.postfix()
            x = self.ident()
            return Macro("deriv", (e, Variable(x)))
        return Macro(kind, (self.postfix(),))

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("float", "int", "index", "ident"):
            return True
        if t.kind == "kw":
            return t.text in ("true", "false")
        return t.kind == "op" and t.text == "("

    def postfix(self) -> Expr:
        e = self.atom()
        while self.at("["):
            self.advance()
            idx = self.expr()
            self.expect("]")
            e = const("get", e, idx)
        return e

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "float":
            self.advance()
            return ScalarLit(float(t.text))
        if t.kind == "int":
            self.advance()
            return CardLit(int(t.text))
        if t.kind == "index":
            self.advance()
            return IndexLit(int(t.text[:-1]))
        if t.kind == "kw" and t.text in ("true", "false"):
            self.advance()
            return BoolLit(t.text == "true")
        if t.kind == "ident":
            self.advance()
            if t.text in NAMED_CONSTANTS:
                return Constant(t.text)
            return Variable(t.text)
        if self.at("("):
            self.advance()
            # operator section
            if self.tok.kind == "op" and self.tok.text in SECTIONS and self.peek().kind == "op" \
                    and self.peek().text == ")":
                name = SECTIONS[self.advance().text]
                self.advance()
                return Constant(name)
            e = self.expr()
            if self.at(","):
                self.advance()
                e2 = self.expr()
                self.expect(")")
                return const("pair", e, e2)
            self.expect(")")
            return e
        self.error(f"unexpected {t.text or 'end of input'!r}")

    # -- types
    def type_(self) -> Ty:
        t = self.type_atom()
        if self.at("=>"):
            self.advance()
            return Fun(t, self.type_())
        return t

    def type_atom(self) -> Ty:
        t = self.tok
        if t.kind == "ident":
            self.advance()
            if t.text == "Array":
                return Array(self.type_atom())
            if t.text in TYPE_NAMES:
                return TYPE_NAMES[t.text]
            raise ParseError(t.line, t.col, f"unknown type {t.text!r}")
        if self.at("("):
            self.advance()
            a = self.type_()
            if self.at(","):
                self.advance()
                b = self.type_()
                self.expect(")")
                return PairT(a, b)
            self.expect(")")
            return a
        self.error(f"expected a type, found {t.text or 'end of input'!r}")


def parse(source: str) -> Expr:
    return Parser(source).parse_program()


def parse_type(source: str) -> Ty:
    p = Parser(source)
    t = p.type_()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return t
