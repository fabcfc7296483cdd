"""Assume/assert clauses and the property container built from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from veritest.propdsl.ast import BoolLit, ConditionAst, contains_predict, instance_vars_of
from veritest.propdsl.parser import parse_condition
from veritest.schema import DatasetSchema


class PropertyError(ValueError):
    """Raised when clauses violate property-level invariants."""


@dataclass(frozen=True)
class AssumeClause:
    """One precondition: holds no model-output references."""

    ast: ConditionAst
    source: str
    args: tuple = ()


@dataclass(frozen=True)
class AssertClause:
    """The postcondition: references at least one model output."""

    ast: ConditionAst
    source: str
    args: tuple = ()


@dataclass(frozen=True)
class PropertySpec:
    """A complete property: conjoined assumes, one assert, its variables.

    ``instance_vars`` lists every instance variable any clause mentions, in
    first-occurrence order scanning assumes first, then the assertion.  The
    constraint compiler materializes one model copy per entry.
    """

    assumes: tuple[AssumeClause, ...]
    assertion: AssertClause
    instance_vars: tuple[str, ...]


def assume_clause(
    text: str,
    args: Sequence[object],
    schema: DatasetSchema,
    instance_vars: Sequence[str],
) -> AssumeClause:
    """Parse one assume condition; rejects model-output references."""
    ast = parse_condition(text, args, schema, instance_vars)
    if contains_predict(ast):
        raise PropertyError(f"assume condition {text!r} must not reference predict")
    return AssumeClause(ast, text, tuple(args))


def assert_clause(
    text: str,
    args: Sequence[object],
    schema: DatasetSchema,
    instance_vars: Sequence[str],
) -> AssertClause:
    """Parse the assert condition; requires a model-output reference."""
    ast = parse_condition(text, args, schema, instance_vars)
    if not contains_predict(ast) and not isinstance(ast, BoolLit):
        raise PropertyError(f"assert condition {text!r} must reference predict")
    return AssertClause(ast, text, tuple(args))


def build_property(
    assumes: Sequence[AssumeClause], assertion: AssertClause
) -> PropertySpec:
    """Assemble clauses into a property.

    The assume clauses are conjoined; an empty list means the precondition
    is trivially true.  A constant ``true``/``false`` assertion is accepted
    as the degenerate case of a label formula with no label references;
    otherwise the assertion must mention at least one model output.

    Raises:
        PropertyError: assume referencing predict; assert lacking one; no
            instance variables anywhere.
    """
    for clause in assumes:
        if contains_predict(clause.ast):
            raise PropertyError(f"assume condition {clause.source!r} must not reference predict")
    if not contains_predict(assertion.ast) and not isinstance(assertion.ast, BoolLit):
        raise PropertyError(f"assert condition {assertion.source!r} must reference predict")
    seen: list[str] = []
    for clause in (*assumes, assertion):
        for var in instance_vars_of(clause.ast):
            if var not in seen:
                seen.append(var)
    if not seen:
        raise PropertyError("property references no instance variables")
    return PropertySpec(tuple(assumes), assertion, tuple(seen))
