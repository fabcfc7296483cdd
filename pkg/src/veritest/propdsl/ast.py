"""Condition AST nodes, pretty-printing, and concrete evaluation.

Conditions are boolean trees over linear arithmetic comparisons.  The
arithmetic side references instance-variable features (``FeatureRef``),
model outputs (``PredictRef``) and rational literals; multiplication is
restricted so at least one operand is a literal, which keeps every
expression linear and therefore encodable as linear arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Union

from veritest.schema import Instance, Prediction, format_rational

CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


class AstError(ValueError):
    """Raised for structurally invalid condition trees."""


# Arithmetic expressions


@dataclass(frozen=True)
class RationalLit:
    value: Fraction


@dataclass(frozen=True)
class FeatureRef:
    """Feature ``feature`` of instance variable ``var`` (index, 0-based)."""

    var: str
    feature: int


@dataclass(frozen=True)
class PredictRef:
    """Model output for label ``label`` (index, 0-based) on variable ``var``."""

    var: str
    label: int


@dataclass(frozen=True)
class Add:
    lhs: "ArithExpr"
    rhs: "ArithExpr"


@dataclass(frozen=True)
class Sub:
    lhs: "ArithExpr"
    rhs: "ArithExpr"


@dataclass(frozen=True)
class Mul:
    lhs: "ArithExpr"
    rhs: "ArithExpr"

    def __post_init__(self) -> None:
        if not isinstance(self.lhs, RationalLit) and not isinstance(self.rhs, RationalLit):
            raise AstError("nonlinear multiplication: one operand must be a literal")


ArithExpr = Union[RationalLit, FeatureRef, PredictRef, Add, Sub, Mul]


# Boolean conditions


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Not:
    operand: "ConditionAst"


@dataclass(frozen=True)
class And:
    items: tuple["ConditionAst", ...]

    def __post_init__(self) -> None:
        if len(self.items) < 2:
            raise AstError("And needs >= 2 members")


@dataclass(frozen=True)
class Or:
    items: tuple["ConditionAst", ...]

    def __post_init__(self) -> None:
        if len(self.items) < 2:
            raise AstError("Or needs >= 2 members")


@dataclass(frozen=True)
class Implies:
    antecedent: "ConditionAst"
    consequent: "ConditionAst"


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: ArithExpr
    rhs: ArithExpr

    def __post_init__(self) -> None:
        if self.op not in CMP_OPS:
            raise AstError(f"unknown comparison operator {self.op!r}")


ConditionAst = Union[BoolLit, Not, And, Or, Implies, Cmp]


def iter_arith(expr: ArithExpr) -> Iterator[ArithExpr]:
    """Yield every arithmetic node, left to right."""
    yield expr
    if isinstance(expr, (Add, Sub, Mul)):
        yield from iter_arith(expr.lhs)
        yield from iter_arith(expr.rhs)


def iter_nodes(cond: ConditionAst) -> Iterator[Union[ConditionAst, ArithExpr]]:
    """Yield every node of a condition tree, syntactic (left-to-right) order."""
    yield cond
    if isinstance(cond, Not):
        yield from iter_nodes(cond.operand)
    elif isinstance(cond, (And, Or)):
        for item in cond.items:
            yield from iter_nodes(item)
    elif isinstance(cond, Implies):
        yield from iter_nodes(cond.antecedent)
        yield from iter_nodes(cond.consequent)
    elif isinstance(cond, Cmp):
        yield from iter_arith(cond.lhs)
        yield from iter_arith(cond.rhs)


def contains_predict(cond: ConditionAst) -> bool:
    return any(isinstance(node, PredictRef) for node in iter_nodes(cond))


def instance_vars_of(cond: ConditionAst) -> list[str]:
    """Instance variables referenced by a condition, first-occurrence order."""
    seen: list[str] = []
    for node in iter_nodes(cond):
        if isinstance(node, (FeatureRef, PredictRef)) and node.var not in seen:
            seen.append(node.var)
    return seen


# Pretty-printing.  Precedence levels mirror the grammar so that printing
# any tree and re-parsing it yields a structurally equal tree.

_COND_PREC = {Implies: 1, Or: 2, And: 3, Not: 4}
_ARITH_PREC = {Add: 1, Sub: 1, Mul: 2}


def _arith_text(expr: ArithExpr, parent: int) -> str:
    if isinstance(expr, RationalLit):
        return format_rational(expr.value)
    if isinstance(expr, FeatureRef):
        return f"{expr.var}[{expr.feature}]"
    if isinstance(expr, PredictRef):
        return f"predict({expr.var})[{expr.label}]"
    prec = _ARITH_PREC[type(expr)]
    if isinstance(expr, Mul):
        text = f"{_arith_text(expr.lhs, prec)} * {_arith_text(expr.rhs, prec + 1)}"
    else:
        op = "+" if isinstance(expr, Add) else "-"
        text = f"{_arith_text(expr.lhs, prec)} {op} {_arith_text(expr.rhs, prec + 1)}"
    return f"({text})" if prec < parent else text


def to_text(cond: ConditionAst, _parent: int = 0) -> str:
    """Render a condition in the concrete grammar."""
    if isinstance(cond, BoolLit):
        return "true" if cond.value else "false"
    if isinstance(cond, Cmp):
        return f"{_arith_text(cond.lhs, 0)} {cond.op} {_arith_text(cond.rhs, 0)}"
    prec = _COND_PREC[type(cond)]
    if isinstance(cond, Not):
        text = f"not {to_text(cond.operand, prec)}"
    elif isinstance(cond, And):
        text = " and ".join(to_text(item, prec + 1) for item in cond.items)
    elif isinstance(cond, Or):
        text = " or ".join(to_text(item, prec + 1) for item in cond.items)
    else:
        text = f"{to_text(cond.antecedent, prec + 1)} => {to_text(cond.consequent, prec)}"
    return f"({text})" if prec < _parent else text


# Concrete evaluation over instances and predictions.


def eval_arith(
    expr: ArithExpr,
    instances: Mapping[str, Instance],
    predictions: Mapping[str, Prediction],
) -> Fraction:
    if isinstance(expr, RationalLit):
        return expr.value
    if isinstance(expr, FeatureRef):
        return instances[expr.var].values[expr.feature]
    if isinstance(expr, PredictRef):
        return Fraction(predictions[expr.var].classes[expr.label])
    lhs = eval_arith(expr.lhs, instances, predictions)
    rhs = eval_arith(expr.rhs, instances, predictions)
    if isinstance(expr, Add):
        return lhs + rhs
    if isinstance(expr, Sub):
        return lhs - rhs
    return lhs * rhs


def eval_condition(
    cond: ConditionAst,
    instances: Mapping[str, Instance],
    predictions: Mapping[str, Prediction],
) -> bool:
    """Evaluate a fully resolved condition on concrete values.

    Total: every node form evaluates to a boolean; missing instance
    variables are caller errors and raise KeyError.
    """
    if isinstance(cond, BoolLit):
        return cond.value
    if isinstance(cond, Not):
        return not eval_condition(cond.operand, instances, predictions)
    if isinstance(cond, And):
        return all(eval_condition(item, instances, predictions) for item in cond.items)
    if isinstance(cond, Or):
        return any(eval_condition(item, instances, predictions) for item in cond.items)
    if isinstance(cond, Implies):
        return (not eval_condition(cond.antecedent, instances, predictions)) or eval_condition(
            cond.consequent, instances, predictions
        )
    lhs = eval_arith(cond.lhs, instances, predictions)
    rhs = eval_arith(cond.rhs, instances, predictions)
    if cond.op == "==":
        return lhs == rhs
    if cond.op == "!=":
        return lhs != rhs
    if cond.op == "<":
        return lhs < rhs
    if cond.op == "<=":
        return lhs <= rhs
    if cond.op == ">":
        return lhs > rhs
    return lhs >= rhs
