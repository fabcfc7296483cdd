"""Constraint-script generation and solving for surrogate models."""

from .script import (
    LOGIC,
    SmtScript,
    block_assignment,
    class_var,
    encode_decision_tree,
    encode_mlp,
    encode_property,
    feature_var,
    translate_condition,
)
from .solve import Assignment, SolverFailure, solve

__all__ = [
    "Assignment",
    "LOGIC",
    "SmtScript",
    "SolverFailure",
    "block_assignment",
    "class_var",
    "encode_decision_tree",
    "encode_mlp",
    "encode_property",
    "feature_var",
    "solve",
    "translate_condition",
]
