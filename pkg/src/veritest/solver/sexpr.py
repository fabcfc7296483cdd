"""Minimal SMT-LIB 2 s-expression reader and writer."""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Sexpr = Union[str, list]


class SexprError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol")
            tokens.append(text[i : j + 1])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise SexprError("unterminated string literal")
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();|":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse_all(text: str) -> list[Sexpr]:
    """Parse every top-level s-expression in the text."""
    tokens = tokenize(text)
    out: list[Sexpr] = []
    pos = 0

    def parse_one() -> Sexpr:
        nonlocal pos
        if pos >= len(tokens):
            raise SexprError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items: list[Sexpr] = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(parse_one())
            if pos >= len(tokens):
                raise SexprError("missing closing parenthesis")
            pos += 1
            return items
        if tok == ")":
            raise SexprError("unbalanced closing parenthesis")
        return tok

    while pos < len(tokens):
        out.append(parse_one())
    return out


def parse_rational_token(tok: str) -> Fraction | None:
    """Numeral or decimal token to exact rational; None if not numeric."""
    if not tok:
        return None
    body = tok
    if body[0] in "+-":
        body = body[1:]
    if not body:
        return None
    if body.isdigit() or (body.count(".") == 1 and body.replace(".", "").isdigit() and not body.startswith(".")):
        return Fraction(tok)
    return None


def to_text(expr: Sexpr) -> str:
    if isinstance(expr, str):
        return expr
    return "(" + " ".join(to_text(item) for item in expr) + ")"


def rational_sexpr(value: Fraction, real_sort: bool) -> str:
    """Emit an exact rational as SMT-LIB: integer, decimal, or (/ p q)."""
    if value.denominator == 1:
        text = str(value.numerator) if not real_sort else f"{value.numerator}.0"
        if value.numerator < 0:
            inner = f"{-value.numerator}" if not real_sort else f"{-value.numerator}.0"
            return f"(- {inner})"
        return text
    p, q = value.numerator, value.denominator
    if p < 0:
        return f"(- (/ {-p} {q}))"
    return f"(/ {p} {q})"
