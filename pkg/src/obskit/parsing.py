"""Tokenizer and recursive-descent parser for the expression grammar.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

``**`` is accepted as a synonym of ``^``. Functions: ``exp`` and ``ln``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping

from obskit.symkernel import Expr, Symbol, add, as_expr, exp, ln, mul, power

__all__ = ["ParseError", "UndeclaredSymbol", "parse_expression", "tokenize"]


class ParseError(ValueError):
    """Malformed model text; carries the 1-based line number when known."""

    def __init__(self, line: int | None, reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + reason)


class UndeclaredSymbol(ParseError):
    def __init__(self, line: int | None, name: str):
        self.name = name
        super().__init__(line, f"undeclared symbol {name!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = {"exp": exp, "ln": ln}


def tokenize(text: str, line: int | None = None) -> list[tuple[str, str]]:
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(line, f"unexpected character {text[pos:].strip()[:1]!r}")
        kind = m.lastgroup
        tok = m.group(kind)
        if tok == "**":
            tok = "^"
        out.append((kind, tok))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens, symbols: Mapping[str, Expr], line):
        self.toks = tokens
        self.i = 0
        self.symbols = symbols
        self.line = line

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, tok=None):
        kind, val = self.peek()
        if kind is None:
            raise ParseError(self.line, "unexpected end of expression")
        if tok is not None and val != tok:
            raise ParseError(self.line, f"expected {tok!r}, found {val!r}")
        self.i += 1
        return kind, val

    def expr(self):
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            _, op = self.take()
            t = self.term()
            terms.append(t if op == "+" else mul(-1, t))
        return terms[0] if len(terms) == 1 else add(*terms)

    def term(self):
        acc = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op = self.take()
            rhs = self.unary()
            acc = mul(acc, rhs) if op == "*" else mul(acc, power(rhs, -1))
        return acc

    def unary(self):
        val = self.peek()[1]
        if val == "-":
            self.take()
            return mul(-1, self.unary())
        if val == "+":
            self.take()
            return self.unary()
        return self.pow()

    def pow(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return as_expr(Fraction(val))
        if kind == "id":
            if self.peek()[1] == "(" and val in _FUNCS:
                self.take("(")
                inner = self.expr()
                self.take(")")
                return _FUNCS[val](inner)
            if val not in self.symbols:
                raise UndeclaredSymbol(self.line, val)
            return self.symbols[val]
        if val == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise ParseError(self.line, f"unexpected token {val!r}")


def parse_expression(text: str, symbols: Mapping[str, Expr], line: int | None = None) -> Expr:
    """Parse ``text`` resolving identifiers through ``symbols``.

    ``symbols`` maps names to expressions, so named constants can be bound
    to numbers directly.
    """
    toks = tokenize(text, line)
    if not toks:
        raise ParseError(line, "empty expression")
    p = _Parser(toks, symbols, line)
    e = p.expr()
    if p.i != len(toks):
        raise ParseError(line, f"unexpected token {toks[p.i][1]!r}")
    return e


def is_identifier(name: str) -> bool:
    return re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) is not None and name not in _FUNCS


def symbol_table(symbols) -> dict[str, Symbol]:
    return {s.name: s for s in symbols}
