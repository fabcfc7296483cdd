"""Assume/assert property language: AST, parser, builders, property files."""

from veritest.propdsl.ast import (
    Add,
    And,
    BoolLit,
    Cmp,
    FeatureRef,
    Implies,
    Mul,
    Not,
    Or,
    PredictRef,
    RationalLit,
    Sub,
    eval_condition,
    instance_vars_of,
    to_text,
)
from veritest.propdsl.clauses import (
    AssertClause,
    AssumeClause,
    PropertyError,
    PropertySpec,
    assert_clause,
    assume_clause,
    build_property,
)
from veritest.propdsl.parser import ConditionSyntaxError, parse_condition
from veritest.propdsl.propfile import parse_property_file
from veritest.propdsl.templates import concept_property, fairness_property, trojan_property

__all__ = [
    "Add",
    "And",
    "AssertClause",
    "AssumeClause",
    "BoolLit",
    "Cmp",
    "ConditionSyntaxError",
    "FeatureRef",
    "Implies",
    "Mul",
    "Not",
    "Or",
    "PredictRef",
    "PropertyError",
    "PropertySpec",
    "RationalLit",
    "Sub",
    "assert_clause",
    "assume_clause",
    "build_property",
    "concept_property",
    "eval_condition",
    "fairness_property",
    "instance_vars_of",
    "parse_condition",
    "parse_property_file",
    "to_text",
    "trojan_property",
]
