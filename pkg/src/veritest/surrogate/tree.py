"""CART-style decision tree over exact rational features.

Inner nodes carry a binary test: ``value <= threshold`` for numeric
features or ``value == code`` for categorical ones; the true branch goes
left.  Sibling edges are therefore mutually exclusive and exhaustive, so
every input reaches exactly one leaf.  Leaves predict a full class vector
(one code per label).  Splits greedily minimize Gini impurity of the joint
prediction vector; impurity ties break toward the lowest feature index,
then the lowest threshold, which makes training deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from veritest.schema import DatasetSchema, Instance, Prediction, format_rational
from veritest.surrogate.data import LabeledSet
from veritest.surrogate.params import TrainParams


@dataclass(frozen=True)
class DtLeaf:
    prediction: Prediction


@dataclass(frozen=True)
class DtInner:
    feature: int
    op: str  # "<=" numeric, "==" categorical; false branch is the complement
    threshold: Fraction
    left: "DtNode"
    right: "DtNode"


DtNode = Union[DtLeaf, DtInner]


@dataclass(frozen=True)
class DecisionTree:
    root: DtNode
    schema: DatasetSchema


def _edge_holds(node: DtInner, x: Instance) -> bool:
    value = x.values[node.feature]
    if node.op == "<=":
        return value <= node.threshold
    return value == node.threshold


def dt_predict(tree: DecisionTree, x: Instance) -> Prediction:
    """Follow the unique root-to-leaf path for x."""
    node = tree.root
    while isinstance(node, DtInner):
        node = node.left if _edge_holds(node, x) else node.right
    return node.prediction


def _gini(counts: dict[Prediction, int], total: int) -> Fraction:
    acc = Fraction(0)
    for count in counts.values():
        acc += Fraction(count, total) ** 2
    return 1 - acc


def _majority(rows: list[tuple[Instance, Prediction]]) -> Prediction:
    counts: dict[Prediction, int] = {}
    for _, z in rows:
        counts[z] = counts.get(z, 0) + 1
    # Deterministic: highest count, then smallest class vector.
    best = max(counts.items(), key=lambda item: (item[1], tuple(-c for c in item[0].classes)))
    return best[0]


def _count(rows: list[tuple[Instance, Prediction]]) -> dict[Prediction, int]:
    counts: dict[Prediction, int] = {}
    for _, z in rows:
        counts[z] = counts.get(z, 0) + 1
    return counts


def _candidate_tests(
    rows: list[tuple[Instance, Prediction]], schema: DatasetSchema
) -> list[tuple[int, str, Fraction]]:
    tests: list[tuple[int, str, Fraction]] = []
    for i, feat in enumerate(schema.features):
        values = sorted({x.values[i] for x, _ in rows})
        if len(values) < 2:
            continue
        if feat.kind == "categorical":
            tests.extend((i, "==", v) for v in values)
        else:
            # Midpoints between consecutive distinct values.
            tests.extend((i, "<=", (a + b) / 2) for a, b in zip(values, values[1:]))
    return tests


def _best_split(
    rows: list[tuple[Instance, Prediction]], schema: DatasetSchema, min_leaf: int
) -> tuple[int, str, Fraction] | None:
    total = len(rows)
    parent_gini = _gini(_count(rows), total)
    best: tuple[Fraction, int, str, Fraction] | None = None
    for feature, op, threshold in _candidate_tests(rows, schema):
        left = [row for row in rows if _matches(row[0], feature, op, threshold)]
        n_left = len(left)
        n_right = total - n_left
        if n_left < min_leaf or n_right < min_leaf:
            continue
        right = [row for row in rows if not _matches(row[0], feature, op, threshold)]
        weighted = (
            Fraction(n_left, total) * _gini(_count(left), n_left)
            + Fraction(n_right, total) * _gini(_count(right), n_right)
        )
        # Zero-gain splits are allowed (XOR-style data has no first-level
        # gain); recursion still terminates because children shrink.
        if weighted > parent_gini:
            continue
        key = (weighted, feature, op, threshold)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return best[1], best[2], best[3]


def _matches(x: Instance, feature: int, op: str, threshold: Fraction) -> bool:
    value = x.values[feature]
    return value <= threshold if op == "<=" else value == threshold


def _grow(
    rows: list[tuple[Instance, Prediction]],
    schema: DatasetSchema,
    depth: int,
    params: TrainParams,
) -> DtNode:
    counts = _count(rows)
    if len(counts) == 1 or depth >= params.max_depth or len(rows) < 2 * params.min_leaf:
        return DtLeaf(_majority(rows))
    split = _best_split(rows, schema, params.min_leaf)
    if split is None:
        return DtLeaf(_majority(rows))
    feature, op, threshold = split
    left_rows = [row for row in rows if _matches(row[0], feature, op, threshold)]
    right_rows = [row for row in rows if not _matches(row[0], feature, op, threshold)]
    return DtInner(
        feature,
        op,
        threshold,
        _grow(left_rows, schema, depth + 1, params),
        _grow(right_rows, schema, depth + 1, params),
    )


def train_decision_tree(data: LabeledSet, params: TrainParams | None = None) -> DecisionTree:
    """Greedy Gini CART fit; deterministic for fixed (data, params).

    Raises:
        ValueError: empty training data.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty labeled set")
    params = params or TrainParams()
    return DecisionTree(_grow(list(data.rows), data.schema, 0, params), data.schema)


def _node_json(node: DtNode) -> dict:
    if isinstance(node, DtLeaf):
        return {"leaf": list(node.prediction.classes)}
    return {
        "feature": node.feature,
        "op": node.op,
        "threshold": format_rational(node.threshold),
        "left": _node_json(node.left),
        "right": _node_json(node.right),
    }


def dt_to_json(tree: DecisionTree) -> str:
    """Serialize for debugging and golden tests (exact value strings)."""
    return json.dumps({"kind": "decision_tree", "root": _node_json(tree.root)}, indent=2)
