"""Small ReLU network surrogate with exact quantized parameters.

Training runs in float64 (numpy), scaling features to the schema's ranges
internally and folding the scaling back into the first layer afterwards,
so the stored network operates on raw feature values.  All weights and
biases are clamped to [-10, 10] every epoch and finally quantized to 3
decimal places, making every parameter an exact rational k/1000; forward
evaluation on :class:`fractions.Fraction` inputs is then exact.

Output heads:
  single label   one output neuron per class, ordered by ascending class
                 code; the predicted class is the neuron with maximal
                 pre-activation, ties toward the smallest code.
  multilabel     one output neuron per label; label is 1 iff its
                 pre-activation is >= the learned threshold ``th``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from veritest.schema import DatasetSchema, Instance, Prediction, format_rational, round_half_away
from veritest.surrogate.data import LabeledSet
from veritest.surrogate.params import TrainParams

PARAM_BOUND = Fraction(10)
PARAM_DIGITS = 3

Matrix = tuple[tuple[Fraction, ...], ...]


def quantize(p: float | int | Fraction) -> Fraction:
    """Clamp to [-10, 10], then round half away from zero to 3 decimals."""
    value = Fraction(p)
    if value > PARAM_BOUND:
        value = PARAM_BOUND
    elif value < -PARAM_BOUND:
        value = -PARAM_BOUND
    return round_half_away(value, PARAM_DIGITS)


def _is_quantized(value: Fraction) -> bool:
    return -PARAM_BOUND <= value <= PARAM_BOUND and (value * 1000).denominator == 1


@dataclass(frozen=True)
class MlpSurrogate:
    """Feed-forward ReLU net; ``weights[i][j][l]`` maps layer i neuron l
    to layer i+1 neuron j, ``biases[i][j]`` likewise."""

    layer_sizes: tuple[int, ...]
    weights: tuple[Matrix, ...]
    biases: tuple[tuple[Fraction, ...], ...]
    mode: str  # "argmax" | "threshold"
    classes: tuple[int, ...]  # argmax: class code per output neuron, ascending
    th: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 3:
            raise ValueError("need at least input, one hidden, and output layer")
        if self.mode not in ("argmax", "threshold"):
            raise ValueError(f"unknown output mode {self.mode!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("weight/bias layer count mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            n_out, n_in = self.layer_sizes[i + 1], self.layer_sizes[i]
            if len(w) != n_out or any(len(row) != n_in for row in w) or len(b) != n_out:
                raise ValueError(f"layer {i} shape mismatch")
            for row in w:
                for p in row:
                    if not _is_quantized(p):
                        raise ValueError(f"weight {p} is not quantized to [-10,10] / 3 decimals")
            for p in b:
                if not _is_quantized(p):
                    raise ValueError(f"bias {p} is not quantized to [-10,10] / 3 decimals")
        if self.mode == "argmax":
            if len(self.classes) != self.layer_sizes[-1]:
                raise ValueError("one output neuron per class required")
            if list(self.classes) != sorted(self.classes):
                raise ValueError("output neurons must be ordered by ascending class code")
        if not _is_quantized(self.th):
            raise ValueError("threshold must be quantized")


def mlp_forward(net: MlpSurrogate, x: Instance) -> tuple[tuple[Fraction, ...], Prediction]:
    """Exact rational forward pass.

    Returns the output layer's pre-activation vector and the prediction
    (argmax with ties toward the smallest class code, or thresholded
    labels).
    """
    out: tuple[Fraction, ...] = x.values
    last = len(net.weights) - 1
    pre: tuple[Fraction, ...] = ()
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = tuple(
            sum((w[j][l] * out[l] for l in range(len(out))), start=Fraction(0)) + b[j]
            for j in range(len(w))
        )
        if i < last:
            out = tuple(v if v > 0 else Fraction(0) for v in pre)
    if net.mode == "argmax":
        best = 0
        for j in range(1, len(pre)):
            if pre[j] > pre[best]:
                best = j
        return pre, Prediction((net.classes[best],))
    return pre, Prediction(tuple(1 if v >= net.th else 0 for v in pre))


def _scales(schema: DatasetSchema) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([float(f.min) for f in schema.features])
    span = np.array([max(float(f.max - f.min), 1e-12) for f in schema.features])
    span[span < 1e-9] = 1.0
    return lo, span


def train_mlp(data: LabeledSet, params: TrainParams | None = None) -> MlpSurrogate:
    """Mini-batch gradient descent, then quantization.

    Single-label schemas get a softmax cross-entropy head; multilabel
    schemas get per-label sigmoid losses with the decision threshold
    chosen afterwards to maximize training F1.  Deterministic given
    (data, params.seed).

    Raises:
        ValueError: empty training data.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty labeled set")
    params = params or TrainParams()
    schema = data.schema
    multilabel = schema.multilabel
    classes = tuple(sorted(schema.labels[0].classes))
    n_out = schema.l_size if multilabel else len(classes)
    sizes = (schema.f_size, *params.hidden, n_out)

    lo, span = _scales(schema)
    x_raw = np.array([[float(v) for v in inst.values] for inst, _ in data.rows])
    x_train = (x_raw - lo) / span
    if multilabel:
        targets = np.array([[float(z.classes[l]) for l in range(schema.l_size)] for _, z in data.rows])
    else:
        code_index = {code: i for i, code in enumerate(classes)}
        labels = np.array([code_index[z.classes[0]] for _, z in data.rows])
        targets = np.zeros((len(labels), n_out))
        targets[np.arange(len(labels)), labels] = 1.0

    rng = np.random.default_rng(params.seed)
    ws = [rng.uniform(-0.5, 0.5, (sizes[i + 1], sizes[i])) for i in range(len(sizes) - 1)]
    bs = [rng.uniform(-0.5, 0.5, sizes[i + 1]) for i in range(len(sizes) - 1)]

    n_rows = len(x_train)
    for _ in range(params.epochs):
        order = rng.permutation(n_rows)
        for start in range(0, n_rows, params.batch_size):
            batch = order[start : start + params.batch_size]
            xb, tb = x_train[batch], targets[batch]
            # Forward with ReLU hidden layers.
            activations = [xb]
            pre_acts = []
            for i, (w, b) in enumerate(zip(ws, bs)):
                z = activations[-1] @ w.T + b
                pre_acts.append(z)
                activations.append(np.maximum(z, 0.0) if i < len(ws) - 1 else z)
            logits = activations[-1]
            if multilabel:
                probs = 1.0 / (1.0 + np.exp(-np.clip(logits, -60, 60)))
            else:
                shifted = logits - logits.max(axis=1, keepdims=True)
                exps = np.exp(shifted)
                probs = exps / exps.sum(axis=1, keepdims=True)
            delta = (probs - tb) / len(batch)
            for i in reversed(range(len(ws))):
                grad_w = delta.T @ activations[i]
                grad_b = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ ws[i]) * (pre_acts[i - 1] > 0)
                ws[i] -= params.learning_rate * grad_w
                bs[i] -= params.learning_rate * grad_b
        for i in range(len(ws)):
            np.clip(ws[i], -10.0, 10.0, out=ws[i])
            np.clip(bs[i], -10.0, 10.0, out=bs[i])

    # Fold the feature scaling into the first layer: the stored network
    # must act on raw feature values.
    ws[0] = ws[0] / span
    bs[0] = bs[0] - ws[0] @ lo
    np.clip(ws[0], -10.0, 10.0, out=ws[0])
    np.clip(bs[0], -10.0, 10.0, out=bs[0])

    weights = tuple(tuple(tuple(quantize(v) for v in row) for row in w) for w in ws)
    biases = tuple(tuple(quantize(v) for v in b) for b in bs)
    net = MlpSurrogate(sizes, weights, biases, "threshold" if multilabel else "argmax",
                       () if multilabel else classes)
    if multilabel:
        th = _learn_threshold(net, data)
        net = MlpSurrogate(sizes, weights, biases, "threshold", (), th)
    return net


def _learn_threshold(net: MlpSurrogate, data: LabeledSet) -> Fraction:
    """Pick th maximizing micro-F1 of (pre-activation >= th) on the data."""
    scored: list[tuple[Fraction, int]] = []
    for inst, z in data.rows:
        pre, _ = mlp_forward(net, inst)
        for l, value in enumerate(pre):
            scored.append((value, z.classes[l]))
    candidates = sorted({v for v, _ in scored})
    if not candidates:
        return Fraction(0)
    candidates.append(candidates[-1] + 1)
    total_pos = sum(t for _, t in scored)
    best_th, best_f1 = candidates[0], Fraction(-1)
    for th in candidates:
        tp = sum(1 for v, t in scored if v >= th and t == 1)
        fp = sum(1 for v, t in scored if v >= th and t == 0)
        fn = total_pos - tp
        denom = 2 * tp + fp + fn
        f1 = Fraction(2 * tp, denom) if denom else Fraction(1)
        if f1 > best_f1:
            best_th, best_f1 = th, f1
    return quantize(best_th)


def mlp_to_json(net: MlpSurrogate) -> str:
    """Serialize for debugging and golden tests (exact value strings)."""
    doc = {
        "kind": "mlp",
        "layer_sizes": list(net.layer_sizes),
        "mode": net.mode,
        "classes": list(net.classes),
        "th": format_rational(net.th),
        "weights": [[[format_rational(v) for v in row] for row in w] for w in net.weights],
        "biases": [[format_rational(v) for v in b] for b in net.biases],
    }
    return json.dumps(doc, indent=2)
