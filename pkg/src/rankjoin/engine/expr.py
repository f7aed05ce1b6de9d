"""Arithmetic over columns: a tokenizer, expression trees and polynomial expansion."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction


class QueryError(ValueError):
    """Malformed or unsupported query text."""


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d+)?)
      | (?P<str>'(?:[^']|'')*')
      | (?P<op><=|>=|<>|!=|[=<>*+\-/(),.;])
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    )""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | str | op | name | end
    text: str
    pos: int

    def is_kw(self, *words) -> bool:
        return self.kind == "name" and self.text.upper() in words


def tokenize(text: str) -> list:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise QueryError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "str":
            val = val[1:-1].replace("''", "'")
        out.append(Token(kind, val, m.start(kind)))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


class TokenStream:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, text) -> bool:
        t = self.peek
        if (t.kind == "op" and t.text == text) or t.is_kw(text.upper()):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Token:
        t = self.next()
        if not ((t.kind == "op" and t.text == text) or t.is_kw(text.upper())):
            raise QueryError(f"expected {text!r} at offset {t.pos}, found {t.text or 'end of input'!r}")
        return t


# ----------------------------------------------------------- expressions --

class Expr:
    def evaluate(self, lookup) -> Fraction:
        raise NotImplementedError

    def refs(self) -> set:
        raise NotImplementedError

    def map_refs(self, f) -> "Expr":
        raise NotImplementedError

    def polynomial(self, scale) -> dict:
        """``{monomial: coefficient}`` over raw column words.

        A monomial is a sorted tuple of ``(ref, power)``; ``scale(ref)`` is
        the fixed-point scale of the column, so a column's value is
        ``word / scale``.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class Col(Expr):
    ref: str

    def evaluate(self, lookup):
        return Fraction(lookup(self.ref))

    def refs(self):
        return {self.ref}

    def map_refs(self, f):
        return Col(f(self.ref))

    def polynomial(self, scale):
        return {((self.ref, 1),): Fraction(1, scale(self.ref))}

    def __str__(self):
        return self.ref


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction

    def evaluate(self, lookup):
        return self.value

    def refs(self):
        return set()

    def map_refs(self, f):
        return self

    def polynomial(self, scale):
        return {(): self.value} if self.value else {}

    def __str__(self):
        return str(self.value)


def _mono_mul(a: tuple, b: tuple) -> tuple:
    powers = dict(a)
    for ref, p in b:
        powers[ref] = powers.get(ref, 0) + p
    return tuple(sorted(powers.items()))


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, lookup):
        a, b = self.left.evaluate(lookup), self.right.evaluate(lookup)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        return a * b

    def refs(self):
        return self.left.refs() | self.right.refs()

    def map_refs(self, f):
        return Bin(self.op, self.left.map_refs(f), self.right.map_refs(f))

    def polynomial(self, scale):
        a, b = self.left.polynomial(scale), self.right.polynomial(scale)
        out = dict(a)
        if self.op in "+-":
            sign = 1 if self.op == "+" else -1
            for k, v in b.items():
                out[k] = out.get(k, 0) + sign * v
        else:
            out = {}
            for ka, va in a.items():
                for kb, vb in b.items():
                    k = _mono_mul(ka, kb)
                    out[k] = out.get(k, 0) + va * vb
        return {k: v for k, v in out.items() if v}

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


def parse_expr(ts: TokenStream) -> Expr:
    node = _term(ts)
    while ts.peek.kind == "op" and ts.peek.text in "+-":
        op = ts.next().text
        node = Bin(op, node, _term(ts))
    return node


def _term(ts):
    node = _factor(ts)
    while ts.peek.kind == "op" and ts.peek.text == "*":
        ts.next()
        node = Bin("*", node, _factor(ts))
    if ts.peek.kind == "op" and ts.peek.text == "/":
        raise QueryError(f"division is not supported (offset {ts.peek.pos})")
    return node


def _factor(ts):
    t = ts.next()
    if t.kind == "num":
        return Num(Fraction(t.text))
    if t.kind == "op" and t.text == "-":
        return Bin("-", Num(Fraction(0)), _factor(ts))
    if t.kind == "op" and t.text == "(":
        e = parse_expr(ts)
        ts.expect(")")
        return e
    if t.kind == "name":
        if ts.peek.kind == "op" and ts.peek.text == ".":
            ts.next()
            col = ts.next()
            if col.kind != "name":
                raise QueryError(f"expected a column name at offset {col.pos}")
            return Col(f"{t.text}.{col.text}")
        return Col(t.text)
    raise QueryError(f"unexpected {t.text or 'end of input'!r} at offset {t.pos}")


def parse_expression(text: str) -> Expr:
    ts = TokenStream(tokenize(text))
    e = parse_expr(ts)
    if ts.peek.kind != "end":
        raise QueryError(f"trailing input at offset {ts.peek.pos}")
    return e
