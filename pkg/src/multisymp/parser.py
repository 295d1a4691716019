"""Recursive-descent parser for the scalar expression language.

Grammar (ASCII)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' integer)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Decimal
literals become exact rationals.  Division is only accepted when the divisor
normalizes to a nonzero constant.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import FUNCTIONS, Add, Const, Expr, Func, Mul, Pow, Sym, normalize

__all__ = ["ParseError", "parse_expr"]


class ParseError(ValueError):
    """Syntax error with a 0-based character offset and the expected tokens."""

    def __init__(self, position: int, expected, message: str = ""):
        self.position = position
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        msg = message or f"expected one of {{{exp}}}"
        super().__init__(f"{msg} at offset {position}")


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(src: str) -> list:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            toks.append(_Tok("number", src[i:j], i))
            i = j
        elif c.isascii() and (c.isalpha() or c == "_"):
            j = i
            while j < n and src[j].isascii() and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("ident", src[i:j], i))
            i = j
        elif c in "+-*/^()":
            toks.append(_Tok(c, c, i))
            i += 1
        else:
            raise ParseError(i, {"number", "identifier", "(", "-"}, f"unexpected character {c!r}")
    toks.append(_Tok("end", "", n))
    return toks


_OPERAND = frozenset({"number", "identifier", "(", "-"})


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            raise ParseError(self.tok.pos, {kind})
        return self.take()

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.take().kind
            rhs = self.term()
            node = Add(node, rhs if op == "+" else Mul(Const(-1), rhs))
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind in ("*", "/"):
            op = self.take()
            rhs = self.factor()
            if op.kind == "*":
                node = Mul(node, rhs)
                continue
            c = normalize(rhs)
            if not isinstance(c, Const):
                raise ParseError(op.pos, {"constant divisor"}, "division by a non-constant expression")
            if c.value == 0:
                raise ParseError(op.pos, {"nonzero divisor"}, "division by zero")
            node = Mul(node, Const(Fraction(1) / Fraction(c.value)))
        return node

    def factor(self) -> Expr:
        if self.tok.kind == "-":
            self.take()
            return Mul(Const(-1), self.factor())
        node = self.base()
        if self.tok.kind == "^":
            self.take()
            sign = 1
            if self.tok.kind == "-":
                self.take()
                sign = -1
            t = self.tok
            if t.kind != "number" or not t.text.isdigit():
                raise ParseError(t.pos, {"integer"})
            self.take()
            exp = sign * int(t.text)
            if exp < 0 and not isinstance(normalize(node), Const):
                raise ParseError(t.pos, {"nonnegative integer"}, "negative power of a non-constant")
            node = Pow(node, exp)
        return node

    def base(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.take()
            return Const(Fraction(t.text))
        if t.kind == "ident":
            self.take()
            if self.tok.kind == "(":
                if t.text not in FUNCTIONS:
                    raise ParseError(t.pos, set(FUNCTIONS), f"unknown function {t.text!r}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(t.text, arg)
            return Sym(t.text)
        if t.kind == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(t.pos, _OPERAND)


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into a raw expression tree (call ``normalize`` for the
    canonical form)."""
    p = _Parser(src)
    node = p.expr()
    if p.tok.kind != "end":
        raise ParseError(p.tok.pos, {"+", "-", "*", "/", "^", "end of input"})
    return node
