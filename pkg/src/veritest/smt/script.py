"""Compiles surrogate models and properties into constraint scripts.

Naming scheme: feature i of instance-variable copy c is `f_i_c`; the class
variable for label `y` is `class_y_c`; decision-tree node j on level i is
`s_j_i_c`; neuron l on layer i is `in_l_i_c` / `out_l_i_c`.  Copy indices
run 1..n in instance-variable declaration order, which keeps every name
injective across copies.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from ..propdsl import (
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
    PropertySpec,
    RationalLit,
    Sub,
)
from ..schema import DatasetSchema, FeatureSpec
from ..solver.sexpr import rational_sexpr
from ..surrogate import DecisionTree, DtInner, DtLeaf, MlpSurrogate

LOGIC = "QF_LIRA"


def feature_var(i: int, copy: int) -> str:
    return f"f_{i}_{copy}"


def class_var(label: str, copy: int) -> str:
    return f"class_{label}_{copy}"


def node_var(j: int, level: int, copy: int) -> str:
    return f"s_{j}_{level}_{copy}"


def in_var(l: int, layer: int, copy: int) -> str:
    return f"in_{l}_{layer}_{copy}"


def out_var(l: int, layer: int, copy: int) -> str:
    return f"out_{l}_{layer}_{copy}"


def rat(value: Fraction) -> str:
    return rational_sexpr(value, real_sort=False)


def quant(value: Fraction) -> str:
    """Quantized parameter as an explicit thousandth."""
    k = value * 1000
    if k.denominator != 1:
        raise ValueError(f"parameter {value} is not quantized to 3 decimals")
    n = k.numerator
    return f"(- (/ {-n} 1000))" if n < 0 else f"(/ {n} 1000)"


def feature_sort(feat: FeatureSpec) -> str:
    return "Real" if feat.kind == "continuous" else "Int"


@dataclass(frozen=True)
class SmtScript:
    logic: str
    declarations: tuple[tuple[str, str], ...]
    domain_assertions: tuple[str, ...]
    surrogate_assertions: tuple[str, ...]
    property_assertions: tuple[str, ...]
    blocking: tuple[str, ...] = ()

    @property
    def assertions(self) -> tuple[str, ...]:
        return (
            self.domain_assertions
            + self.surrogate_assertions
            + self.property_assertions
            + self.blocking
        )

    @property
    def text(self) -> str:
        lines = ["(set-option :produce-models true)", f"(set-logic {self.logic})"]
        for name, sort in self.declarations:
            lines.append(f"(declare-const {name} {sort})")
        for a in self.assertions:
            lines.append(f"(assert {a})")
        lines.append("(check-sat)")
        lines.append("(get-model)")
        return "\n".join(lines) + "\n"

    def with_block(self, assertion: str) -> "SmtScript":
        return replace(self, blocking=self.blocking + (assertion,))


# -- decision trees -----------------------------------------------------------


def _edge_condition(feat: FeatureSpec, index: int, node: DtInner, copy: int, taken: bool) -> str:
    """Condition on the edge into a child; `taken` selects the true branch."""
    name = feature_var(index, copy)
    if node.op == "==":
        eq = f"(= {name} {rat(node.threshold)})"
        return eq if taken else f"(not {eq})"
    t = node.threshold
    if feature_sort(feat) == "Int" and t.denominator != 1:
        # Tighten fractional thresholds so integer-sorted scripts stay pure.
        floor = Fraction(t.numerator // t.denominator)
        return f"(<= {name} {rat(floor)})" if taken else f"(>= {name} {rat(floor + 1)})"
    return f"(<= {name} {rat(t)})" if taken else f"(> {name} {rat(t)})"


def encode_decision_tree(
    tree: DecisionTree, copy: int, schema: DatasetSchema
) -> tuple[tuple[tuple[str, str], ...], tuple[str, ...]]:
    """Declarations and assertions for one copy of a decision tree."""
    decls: list[tuple[str, str]] = []
    asserts: list[str] = []
    # level-order walk assigning 1-based node numbers per level
    level = [(tree.root, None, None)]  # (node, parent_var, edge_condition)
    depth = 0
    while level:
        next_level = []
        for j, (node, parent, cond) in enumerate(level, start=1):
            var = node_var(j, depth, copy)
            decls.append((var, "Bool"))
            if parent is None:
                asserts.append(var)
            else:
                asserts.append(
                    f"(or (and {parent} {cond} {var})"
                    f" (and (or (not {parent}) (not {cond})) (not {var})))"
                )
            if isinstance(node, DtLeaf):
                parts = [
                    f"(= {class_var(schema.labels[k].name, copy)} {node.prediction.classes[k]})"
                    for k in range(len(schema.labels))
                ]
                body = parts[0] if len(parts) == 1 else "(and " + " ".join(parts) + ")"
                asserts.append(f"(=> {var} {body})")
            else:
                feat = schema.features[node.feature]
                next_level.append((node.left, var, _edge_condition(feat, node.feature, node, copy, True)))
                next_level.append((node.right, var, _edge_condition(feat, node.feature, node, copy, False)))
        level = next_level
        depth += 1
    return tuple(decls), tuple(asserts)


# -- neural networks -----------------------------------------------------------


def encode_mlp(
    net: MlpSurrogate, copy: int, schema: DatasetSchema
) -> tuple[tuple[tuple[str, str], ...], tuple[str, ...]]:
    """Declarations and assertions for one copy of a quantized network.

    Layer-0 outputs are the copy's feature variables; hidden layers get
    in/out pairs with the ReLU disjunction; the output layer gets only its
    weighted-sum inputs plus the class constraint.
    """
    sizes = net.layer_sizes
    k = len(sizes) - 2  # hidden layer count
    decls: list[tuple[str, str]] = []
    asserts: list[str] = []
    for layer in range(1, k + 2):
        for l in range(1, sizes[layer] + 1):
            decls.append((in_var(l, layer, copy), "Real"))
            if layer <= k:
                decls.append((out_var(l, layer, copy), "Real"))

    def source(layer: int, j: int) -> str:
        # j is 0-based within the previous layer
        if layer == 1:
            return feature_var(j, copy)
        return out_var(j + 1, layer - 1, copy)

    for layer in range(1, k + 2):
        for l in range(1, sizes[layer] + 1):
            terms = [
                f"(* {quant(net.weights[layer - 1][l - 1][j])} {source(layer, j)})"
                for j in range(sizes[layer - 1])
            ]
            total = " ".join(terms + [quant(net.biases[layer - 1][l - 1])])
            asserts.append(f"(= {in_var(l, layer, copy)} (+ {total}))")
            if layer <= k:
                iv, ov = in_var(l, layer, copy), out_var(l, layer, copy)
                asserts.append(
                    f"(or (and (< {iv} 0) (= {ov} 0)) (and (>= {iv} 0) (= {ov} {iv})))"
                )

    last = k + 1
    if net.mode == "argmax":
        label = schema.labels[0].name
        branches = []
        for ci, code in enumerate(net.classes, start=1):
            dominance = [
                f"(>= {in_var(ci, last, copy)} {in_var(o, last, copy)})"
                for o in range(1, sizes[last] + 1)
                if o != ci
            ]
            branch = dominance + [f"(= {class_var(label, copy)} {code})"]
            branches.append("(and " + " ".join(branch) + ")")
        asserts.append(branches[0] if len(branches) == 1 else "(or " + " ".join(branches) + ")")
    else:
        th = quant(net.th)
        for l, spec in enumerate(schema.labels, start=1):
            cv = class_var(spec.name, copy)
            iv = in_var(l, last, copy)
            asserts.append(
                f"(or (and (>= {iv} {th}) (= {cv} 1)) (and (< {iv} {th}) (= {cv} 0)))"
            )
    return tuple(decls), tuple(asserts)


# -- property translation -------------------------------------------------------


def translate_condition(cond, copies: dict[str, int], schema: DatasetSchema) -> str:
    """Condition AST to constraint text with copy-indexed variables."""

    def arith(node) -> str:
        if isinstance(node, RationalLit):
            return rat(node.value)
        if isinstance(node, FeatureRef):
            return feature_var(node.feature, copies[node.var])
        if isinstance(node, PredictRef):
            return class_var(schema.labels[node.label].name, copies[node.var])
        if isinstance(node, Add):
            return f"(+ {arith(node.lhs)} {arith(node.rhs)})"
        if isinstance(node, Sub):
            return f"(- {arith(node.lhs)} {arith(node.rhs)})"
        if isinstance(node, Mul):
            return f"(* {arith(node.lhs)} {arith(node.rhs)})"
        raise TypeError(f"not an arithmetic node: {node!r}")

    def walk(node) -> str:
        if isinstance(node, BoolLit):
            return "true" if node.value else "false"
        if isinstance(node, Not):
            return f"(not {walk(node.operand)})"
        if isinstance(node, And):
            return "(and " + " ".join(walk(c) for c in node.items) + ")"
        if isinstance(node, Or):
            return "(or " + " ".join(walk(c) for c in node.items) + ")"
        if isinstance(node, Implies):
            return f"(=> {walk(node.antecedent)} {walk(node.consequent)})"
        if isinstance(node, Cmp):
            lhs, rhs = arith(node.lhs), arith(node.rhs)
            if node.op == "==":
                return f"(= {lhs} {rhs})"
            if node.op == "!=":
                return f"(not (= {lhs} {rhs}))"
            return f"({node.op} {lhs} {rhs})"
        raise TypeError(f"not a condition node: {node!r}")

    return walk(cond)


def _domain_assertions(
    schema: DatasetSchema,
    copy: int,
    bounds: tuple[tuple[Fraction, Fraction], ...] | None,
) -> list[str]:
    out: list[str] = []
    for i, feat in enumerate(schema.features):
        name = feature_var(i, copy)
        if feat.kind == "categorical":
            eqs = " ".join(f"(= {name} {rat(v)})" for v in feat.categories)
            out.append(eqs if len(feat.categories) == 1 else f"(or {eqs})")
        else:
            out.append(f"(>= {name} {rat(feat.min)})")
            out.append(f"(<= {name} {rat(feat.max)})")
        if bounds is not None:
            lo, hi = bounds[i]
            out.append(f"(>= {name} {rat(lo)})")
            out.append(f"(<= {name} {rat(hi)})")
    return out


def encode_property(
    spec: PropertySpec,
    schema: DatasetSchema,
    surrogate,
    bounds: tuple[tuple[Fraction, Fraction], ...] | None = None,
) -> SmtScript:
    """Full script: assume clauses ∧ surrogate copies ∧ negated assertion.

    SAT means the property fails on the surrogate.  `bounds` narrows every
    feature to derived [min, max] intervals (the bound_cex option).
    """
    copies = {var: i for i, var in enumerate(spec.instance_vars, start=1)}
    decls: list[tuple[str, str]] = []
    domain: list[str] = []
    for var in spec.instance_vars:
        c = copies[var]
        for i, feat in enumerate(schema.features):
            decls.append((feature_var(i, c), feature_sort(feat)))
        for label in schema.labels:
            decls.append((class_var(label.name, c), "Int"))
        domain.extend(_domain_assertions(schema, c, bounds))

    surrogate_asserts: list[str] = []
    for var in spec.instance_vars:
        c = copies[var]
        if isinstance(surrogate, DecisionTree):
            sdecls, sasserts = encode_decision_tree(surrogate, c, schema)
        elif isinstance(surrogate, MlpSurrogate):
            sdecls, sasserts = encode_mlp(surrogate, c, schema)
        else:
            raise TypeError(f"unsupported surrogate: {type(surrogate).__name__}")
        decls.extend(sdecls)
        surrogate_asserts.extend(sasserts)

    prop: list[str] = []
    for clause in spec.assumes:
        prop.append(translate_condition(clause.ast, copies, schema))
    prop.append(f"(not {translate_condition(spec.assertion.ast, copies, schema)})")

    return SmtScript(
        logic=LOGIC,
        declarations=tuple(decls),
        domain_assertions=tuple(domain),
        surrogate_assertions=tuple(surrogate_asserts),
        property_assertions=tuple(prop),
    )


def block_assignment(assignment) -> str:
    """Exclude the exact feature values of a prior satisfying assignment."""
    parts = []
    for c, values in enumerate(assignment.features, start=1):
        for i, v in enumerate(values):
            parts.append(f"(= {feature_var(i, c)} {rat(v)})")
    if len(parts) == 1:
        return f"(not {parts[0]})"
    return "(not (and " + " ".join(parts) + "))"
