"""Recursive-descent parser for condition text.

Grammar (conditions bind loosest to tightest: ``=>``, ``or``, ``and``,
``not``, comparisons; arithmetic: ``+``/``-`` then ``*``)::

    cond   := impl ; impl := or ( "=>" impl )? ; or := and ( "or" and )* ;
    and    := not ( "and" not )* ; not := "not" not | atom ;
    atom   := "true" | "false" | "(" cond ")" | cmp ;
    cmp    := arith ("=="|"!="|"<"|"<="|">"|">=") arith | predict ;
    arith  := term (("+"|"-") term)* ; term := factor ("*" factor)* ;
    factor := "-" factor | "(" arith ")" | number | ident
            | ivar "[" key "]" | predict ;
    predict:= ("mut.")? "predict(" ivar ")" ("[" key "]")? ;
    key    := number | ident ;  ivar := ident

Unary minus and parenthesized arithmetic are accepted beyond the core
grammar so any printable expression round-trips.  Identifiers that name
neither an instance variable, a feature, nor a label are placeholders and
bind to caller-supplied argument values in the order of their first
syntactic occurrence; a placeholder bound to a vector is indexed with
``name[key]`` or compared whole against an unkeyed ``predict``.

On a multilabel schema, ``predict(x)`` without a label key denotes the
whole output vector: it may only be compared with ``==`` or ``!=`` against
another unkeyed predict or a vector value, and such comparisons expand to
per-label conjunctions (or disjunctions for ``!=``) at parse time.  A keyed
``predict(x)[L]`` in bare boolean position abbreviates ``== 1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

from veritest.propdsl.ast import (
    Add,
    And,
    ArithExpr,
    AstError,
    BoolLit,
    Cmp,
    ConditionAst,
    FeatureRef,
    Implies,
    Mul,
    Not,
    Or,
    PredictRef,
    RationalLit,
    Sub,
)
from veritest.schema import DatasetSchema

_KEYWORDS = {"true", "false", "and", "or", "not", "mut", "predict"}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?(?:/\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>==|!=|<=|>=|=>|[<>+\-*()\[\].,]))"
)

BoundValue = Union[Fraction, tuple[Fraction, ...]]


class ConditionSyntaxError(ValueError):
    """Parse failure, carrying the character position of the offense."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"at position {position}: {message}")
        self.position = position


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            where = len(text) - len(stripped)
            raise ConditionSyntaxError(f"unexpected character {stripped[0]!r}", where)
        kind = str(match.lastgroup)
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


def coerce_value(value: object) -> BoundValue:
    """Normalize an argument value to an exact rational or rational vector."""
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (list, tuple)):
        flat = [coerce_value(item) for item in value]
        if any(isinstance(item, tuple) for item in flat):
            raise ValueError("nested vectors are not valid argument values")
        return tuple(item for item in flat if isinstance(item, Fraction))
    raise ValueError(f"unsupported argument value {value!r}")


# Sentinels for vector-valued subterms that must be eliminated by the
# comparison expansion before the AST is finished.


@dataclass(frozen=True)
class _VectorPredict:
    var: str


@dataclass(frozen=True)
class _VectorLit:
    values: tuple[Fraction, ...]


_Operand = Union[ArithExpr, _VectorPredict, _VectorLit]


class _Parser:
    def __init__(
        self,
        text: str,
        schema: DatasetSchema,
        instance_vars: Sequence[str],
        bind: Callable[[str, int], BoundValue],
    ) -> None:
        self.text = text
        self.schema = schema
        self.ivars = list(instance_vars)
        self.bind = bind
        self.tokens = _tokenize(text)
        self.i = 0

    # token helpers

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().kind != "end" and self.peek().text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text:
            shown = tok.text or "end of input"
            raise ConditionSyntaxError(f"expected {text!r}, got {shown!r}", tok.pos)
        return tok

    def fail(self, message: str) -> ConditionSyntaxError:
        return ConditionSyntaxError(message, self.peek().pos)

    # grammar

    def parse(self) -> ConditionAst:
        cond = self.cond()
        tok = self.peek()
        if tok.kind != "end":
            raise ConditionSyntaxError(f"trailing input {tok.text!r}", tok.pos)
        return cond

    def cond(self) -> ConditionAst:
        lhs = self.disj()
        if self.accept("=>"):
            return Implies(lhs, self.cond())
        return lhs

    def disj(self) -> ConditionAst:
        items = [self.conj()]
        while self.accept("or"):
            items.append(self.conj())
        return Or(tuple(items)) if len(items) > 1 else items[0]

    def conj(self) -> ConditionAst:
        items = [self.negation()]
        while self.accept("and"):
            items.append(self.negation())
        return And(tuple(items)) if len(items) > 1 else items[0]

    def negation(self) -> ConditionAst:
        if self.accept("not"):
            return Not(self.negation())
        return self.atom()

    def atom(self) -> ConditionAst:
        tok = self.peek()
        if tok.text == "true" and tok.kind == "ident":
            self.take()
            return BoolLit(True)
        if tok.text == "false" and tok.kind == "ident":
            self.take()
            return BoolLit(False)
        if tok.text == "(":
            # Could open a condition or an arithmetic group; try the
            # condition reading first and fall back on failure.
            mark = self.i
            try:
                self.take()
                inner = self.cond()
                self.expect(")")
                return inner
            except ConditionSyntaxError:
                self.i = mark
        return self.cmp()

    def cmp(self) -> ConditionAst:
        lhs = self.arith()
        tok = self.peek()
        if tok.text in ("==", "!=", "<", "<=", ">", ">="):
            self.take()
            rhs = self.arith()
            return self.make_cmp(tok.text, lhs, rhs, tok.pos)
        if isinstance(lhs, PredictRef):
            # Bare boolean position: predict(x)[L] abbreviates == 1.
            return Cmp("==", lhs, RationalLit(Fraction(1)))
        if isinstance(lhs, _VectorPredict):
            raise self.fail("whole-vector predict needs == or != comparison")
        raise self.fail("expected comparison operator")

    def make_cmp(self, op: str, lhs: _Operand, rhs: _Operand, pos: int) -> ConditionAst:
        vectorish = (_VectorPredict, _VectorLit)
        if not isinstance(lhs, vectorish) and not isinstance(rhs, vectorish):
            return Cmp(op, lhs, rhs)
        if op not in ("==", "!="):
            raise ConditionSyntaxError("vector comparison supports only == and !=", pos)
        sides = [self.components(side, pos) for side in (lhs, rhs)]
        if len(sides[0]) != len(sides[1]):
            raise ConditionSyntaxError(
                f"vector length mismatch: {len(sides[0])} vs {len(sides[1])}", pos
            )
        pairs = [Cmp("==", a, b) for a, b in zip(*sides)]
        if len(pairs) == 1:
            return pairs[0] if op == "==" else Not(pairs[0])
        if op == "==":
            return And(tuple(pairs))
        return Or(tuple(Cmp("!=", p.lhs, p.rhs) for p in pairs))

    def components(self, side: _Operand, pos: int) -> list[ArithExpr]:
        if isinstance(side, _VectorPredict):
            return [PredictRef(side.var, l) for l in range(self.schema.l_size)]
        if isinstance(side, _VectorLit):
            return [RationalLit(v) for v in side.values]
        raise ConditionSyntaxError("cannot compare a vector with a scalar", pos)

    def arith(self) -> _Operand:
        lhs = self.term()
        while True:
            tok = self.peek()
            if tok.text == "+" and self.accept("+"):
                lhs = Add(self.scalar(lhs, tok.pos), self.scalar(self.term(), tok.pos))
            elif tok.text == "-" and self.accept("-"):
                lhs = Sub(self.scalar(lhs, tok.pos), self.scalar(self.term(), tok.pos))
            else:
                return lhs

    def term(self) -> _Operand:
        lhs = self.factor()
        while True:
            tok = self.peek()
            if tok.text != "*":
                return lhs
            self.take()
            try:
                lhs = Mul(self.scalar(lhs, tok.pos), self.scalar(self.factor(), tok.pos))
            except AstError as exc:
                raise ConditionSyntaxError(str(exc), tok.pos) from exc

    def scalar(self, operand: _Operand, pos: int) -> ArithExpr:
        if isinstance(operand, (_VectorPredict, _VectorLit)):
            raise ConditionSyntaxError("vector value used in arithmetic", pos)
        return operand

    def factor(self) -> _Operand:
        tok = self.peek()
        if tok.text == "-":
            self.take()
            operand = self.scalar(self.factor(), tok.pos)
            if isinstance(operand, RationalLit):
                return RationalLit(-operand.value)
            return Mul(RationalLit(Fraction(-1)), operand)
        if tok.text == "(":
            self.take()
            inner = self.arith()
            self.expect(")")
            return inner
        if tok.kind == "number":
            self.take()
            return RationalLit(Fraction(tok.text))
        if tok.kind != "ident":
            shown = tok.text or "end of input"
            raise ConditionSyntaxError(f"expected a value, got {shown!r}", tok.pos)
        if tok.text in ("mut", "predict"):
            return self.predict()
        self.take()
        name = tok.text
        if name in self.ivars:
            if not self.accept("["):
                raise ConditionSyntaxError(
                    f"instance variable {name!r} must be indexed as {name}[feature]", tok.pos
                )
            index = self.feature_key()
            self.expect("]")
            return FeatureRef(name, index)
        if any(f.name == name for f in self.schema.features) or any(
            l.name == name for l in self.schema.labels
        ):
            raise ConditionSyntaxError(
                f"{name!r} is a feature or label name and needs an indexed position", tok.pos
            )
        value = self.bind(name, tok.pos)
        if isinstance(value, tuple):
            if self.accept("["):
                index = self.vector_key(len(value))
                self.expect("]")
                return RationalLit(value[index])
            return _VectorLit(value)
        if self.peek().text == "[":
            raise ConditionSyntaxError(f"cannot index scalar value {name!r}", self.peek().pos)
        return RationalLit(value)

    def predict(self) -> _Operand:
        if self.accept("mut"):
            self.expect(".")
        tok = self.take()
        if tok.text != "predict":
            raise ConditionSyntaxError(f"expected 'predict', got {tok.text!r}", tok.pos)
        self.expect("(")
        var = self.take()
        if var.kind != "ident" or var.text not in self.ivars:
            raise ConditionSyntaxError(f"unknown instance variable {var.text!r}", var.pos)
        self.expect(")")
        if self.accept("["):
            label = self.label_key()
            self.expect("]")
            return PredictRef(var.text, label)
        if self.schema.l_size == 1:
            return PredictRef(var.text, 0)
        return _VectorPredict(var.text)

    # key resolution

    def key_value(self) -> tuple[_Token, Fraction | None]:
        """Take a key token; returns (token, numeric value or None for names)."""
        tok = self.take()
        if tok.kind == "number":
            return tok, Fraction(tok.text)
        if tok.kind != "ident":
            shown = tok.text or "end of input"
            raise ConditionSyntaxError(f"expected an index, got {shown!r}", tok.pos)
        return tok, None

    def as_index(self, value: Fraction, limit: int, what: str, pos: int) -> int:
        if value.denominator != 1 or not 0 <= value < limit:
            raise ConditionSyntaxError(f"{what} index {value} out of range [0, {limit})", pos)
        return int(value)

    def feature_key(self) -> int:
        tok, value = self.key_value()
        if value is None:
            for i, feat in enumerate(self.schema.features):
                if feat.name == tok.text:
                    return i
            bound = self.bind(tok.text, tok.pos)
            if isinstance(bound, tuple):
                raise ConditionSyntaxError(f"vector {tok.text!r} cannot be an index", tok.pos)
            value = bound
        return self.as_index(value, self.schema.f_size, "feature", tok.pos)

    def label_key(self) -> int:
        tok, value = self.key_value()
        if value is None:
            for i, lab in enumerate(self.schema.labels):
                if lab.name == tok.text:
                    return i
            bound = self.bind(tok.text, tok.pos)
            if isinstance(bound, tuple):
                raise ConditionSyntaxError(f"vector {tok.text!r} cannot be an index", tok.pos)
            value = bound
        return self.as_index(value, self.schema.l_size, "label", tok.pos)

    def vector_key(self, length: int) -> int:
        tok, value = self.key_value()
        if value is None:
            for i, feat in enumerate(self.schema.features):
                if feat.name == tok.text:
                    value = Fraction(i)
                    break
            else:
                bound = self.bind(tok.text, tok.pos)
                if isinstance(bound, tuple):
                    raise ConditionSyntaxError(f"vector {tok.text!r} cannot be an index", tok.pos)
                value = bound
        return self.as_index(value, length, "vector", tok.pos)


class _PositionalBinder:
    """Matches placeholders to argument values by first syntactic occurrence."""

    def __init__(self, args: Sequence[object]) -> None:
        self.values = [coerce_value(a) for a in args]
        self.order: list[str] = []
        self.bound: dict[str, BoundValue] = {}

    def __call__(self, name: str, pos: int) -> BoundValue:
        if name in self.bound:
            return self.bound[name]
        if len(self.order) >= len(self.values):
            raise ConditionSyntaxError(
                f"arity mismatch: no argument left for placeholder {name!r}", pos
            )
        value = self.values[len(self.order)]
        self.order.append(name)
        self.bound[name] = value
        return value


def parse_condition(
    text: str,
    args: Sequence[object],
    schema: DatasetSchema,
    instance_vars: Sequence[str],
) -> ConditionAst:
    """Parse condition text into a fully resolved AST.

    Placeholder identifiers are substituted with ``args`` positionally, in
    the order each placeholder first occurs in ``text``.

    Raises:
        ConditionSyntaxError: syntax errors (with position), unknown names,
            placeholder/argument arity mismatch, nonlinear multiplication.
    """
    binder = _PositionalBinder(args)
    ast = _Parser(text, schema, instance_vars, binder).parse()
    if len(binder.order) < len(binder.values):
        raise ConditionSyntaxError(
            f"arity mismatch: {len(binder.values)} args for {len(binder.order)} placeholders",
            len(text),
        )
    return ast


def parse_condition_named(
    text: str,
    bindings: dict[str, object],
    schema: DatasetSchema,
    instance_vars: Sequence[str],
) -> ConditionAst:
    """Parse condition text resolving placeholders from a name→value map."""
    coerced = {name: coerce_value(v) for name, v in bindings.items()}

    def bind(name: str, pos: int) -> BoundValue:
        if name not in coerced:
            raise ConditionSyntaxError(
                f"unresolved identifier {name!r}: not an instance variable, "
                "feature, label, or bound value",
                pos,
            )
        return coerced[name]

    return _Parser(text, schema, instance_vars, bind).parse()
