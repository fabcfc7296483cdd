"""Builders for the three supported property families."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from veritest.propdsl.ast import (
    And,
    BoolLit,
    Cmp,
    ConditionAst,
    FeatureRef,
    PredictRef,
    RationalLit,
    instance_vars_of,
    iter_nodes,
    to_text,
)
from veritest.propdsl.clauses import AssertClause, AssumeClause, PropertyError, PropertySpec
from veritest.schema import DatasetSchema, Instance, Prediction, validate_instance, validate_prediction


def fairness_property(schema: DatasetSchema, s: int) -> PropertySpec:
    """Individual fairness with respect to sensitive feature ``s``.

    Two instance variables x and y that differ in feature s and agree
    everywhere else must receive the same prediction.  Produces one assume
    clause per feature, in feature order, with the single inequality at
    position s.

    Raises:
        PropertyError: s out of range, or schema has more than one label.
    """
    if not 0 <= s < schema.f_size:
        raise PropertyError(f"sensitive feature index {s} out of range [0, {schema.f_size})")
    if schema.multilabel:
        raise PropertyError("fairness property needs a single-label schema")
    assumes = []
    for i in range(schema.f_size):
        op = "!=" if i == s else "=="
        ast = Cmp(op, FeatureRef("x", i), FeatureRef("y", i))
        assumes.append(AssumeClause(ast, f"x[i] {op} y[i]", (i,)))
    assertion = AssertClause(
        Cmp("==", PredictRef("x", 0), PredictRef("y", 0)), "predict(x) == predict(y)"
    )
    return PropertySpec(tuple(assumes), assertion, ("x", "y"))


def concept_property(schema: DatasetSchema, phi: ConditionAst) -> PropertySpec:
    """Label-relationship property: assume true, assert ``phi``.

    ``phi`` is a boolean formula over model outputs of exactly one instance
    variable (labels substituted by the model's predicted truth values).
    The constant formula ``true`` is accepted and yields an unfalsifiable
    property over a single nominal variable.

    Raises:
        PropertyError: phi references features or multiple instance vars.
    """
    if any(isinstance(node, FeatureRef) for node in iter_nodes(phi)):
        raise PropertyError("concept formula must reference only model outputs, not features")
    variables = instance_vars_of(phi)
    if len(variables) > 1:
        raise PropertyError(f"concept formula must use one instance variable, found {variables}")
    var = variables[0] if variables else "x"
    assume = AssumeClause(BoolLit(True), "true")
    assertion = AssertClause(phi, to_text(phi))
    return PropertySpec((assume,), assertion, (var,))


def trojan_property(
    schema: DatasetSchema, trigger_features: Iterable[int], t: Instance, z: Prediction
) -> PropertySpec:
    """Trigger-robustness property: pinned trigger features force output z.

    One assume clause ``x[f] == t[f]`` per trigger feature f (ascending),
    and an assert that every label of the prediction equals z.  A
    counterexample is an input carrying the trigger that the model does
    not map to z.

    Raises:
        PropertyError: empty/out-of-range trigger set, or t/z invalid for
            the schema.
    """
    trigger = sorted(set(trigger_features))
    if not trigger:
        raise PropertyError("trigger feature set must be nonempty")
    if trigger[0] < 0 or trigger[-1] >= schema.f_size:
        raise PropertyError(f"trigger features {trigger} out of range [0, {schema.f_size})")
    problems = validate_instance(schema, t)
    if problems:
        raise PropertyError(f"trigger instance invalid: {problems[0]}")
    problems = validate_prediction(schema, z)
    if problems:
        raise PropertyError(f"target prediction invalid: {problems[0]}")
    assumes = tuple(
        AssumeClause(
            Cmp("==", FeatureRef("x", f), RationalLit(t.values[f])), "x[f] == t[f]", (f, t.values[f])
        )
        for f in trigger
    )
    equalities: list[ConditionAst] = [
        Cmp("==", PredictRef("x", l), RationalLit(Fraction(z.classes[l])))
        for l in range(schema.l_size)
    ]
    ast = equalities[0] if len(equalities) == 1 else And(tuple(equalities))
    assertion = AssertClause(ast, "predict(x) == z", (tuple(Fraction(c) for c in z.classes),))
    return PropertySpec(assumes, assertion, ("x",))
