"""White-box stand-in models: decision tree and small ReLU network."""

from veritest.surrogate.data import LabeledSet
from veritest.surrogate.mlp import MlpSurrogate, mlp_forward, mlp_to_json, quantize, train_mlp
from veritest.surrogate.params import TrainParams
from veritest.surrogate.tree import (
    DecisionTree,
    DtInner,
    DtLeaf,
    dt_predict,
    dt_to_json,
    train_decision_tree,
)

__all__ = [
    "DecisionTree",
    "DtInner",
    "DtLeaf",
    "LabeledSet",
    "MlpSurrogate",
    "TrainParams",
    "dt_predict",
    "dt_to_json",
    "mlp_forward",
    "mlp_to_json",
    "quantize",
    "train_decision_tree",
    "train_mlp",
]
