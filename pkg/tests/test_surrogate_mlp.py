import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_quantized_mlp
from veritest.schema import Instance, Prediction, parse_schema, random_instance
from veritest.surrogate import LabeledSet, MlpSurrogate, TrainParams, mlp_forward, mlp_to_json, quantize, train_mlp

TWO_CONT = parse_schema(
    '<schema><feature name="u" min="0" max="1"/><feature name="v" min="0" max="1"/>'
    '<label name="y" classes="0,1"/></schema>'
)

MULTI = parse_schema(
    '<schema><feature name="u" min="0" max="1"/>'
    '<label name="dog" classes="0,1"/><label name="animal" classes="0,1"/></schema>'
)


def test_quantize_examples():
    assert quantize(0.0004) == 0
    assert quantize(12.3456) == Fraction(10)
    assert quantize(-3.14159) == Fraction(-3142, 1000)
    assert quantize(Fraction(1, 2)) == Fraction(1, 2)
    assert quantize(-12.0) == Fraction(-10)


@given(st.floats(min_value=-100, max_value=100, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_quantize_idempotent(p):
    once = quantize(p)
    assert quantize(once) == once
    assert -10 <= once <= 10
    assert (once * 1000).denominator == 1


def test_relu_negative_branch():
    # 1 input -> 1 hidden (w=1, b=-1) -> 1 output (w=1, b=0); input 0.5
    # gives hidden pre-activation -0.5, so ReLU forces the output to 0.
    net = MlpSurrogate(
        (1, 1, 1),
        (((Fraction(1),),), ((Fraction(1),),)),
        ((Fraction(-1),), (Fraction(0),)),
        "threshold",
        (),
        Fraction(0),
    )
    pre, z = mlp_forward(net, Instance((Fraction(1, 2),)))
    assert pre == (Fraction(0),)
    assert z == Prediction((1,))  # 0 >= th triggers the >= branch


def test_argmax_tie_breaks_to_smallest_class_code():
    net = MlpSurrogate(
        (1, 1, 2),
        (((Fraction(1),),), ((Fraction(1),), (Fraction(1),))),
        ((Fraction(0),), (Fraction(0), Fraction(0))),
        "argmax",
        (0, 1),
    )
    pre, z = mlp_forward(net, Instance((Fraction(16, 5),)))
    assert pre[0] == pre[1]
    assert z == Prediction((0,))


def test_multilabel_threshold_boundary_is_ge():
    net = MlpSurrogate(
        (1, 1, 2),
        (((Fraction(1),),), ((Fraction(1),), (Fraction(-1),))),
        ((Fraction(0),), (Fraction(0), Fraction(0))),
        "threshold",
        (),
        Fraction(0),
    )
    pre, z = mlp_forward(net, Instance((Fraction(0),)))
    assert pre == (Fraction(0), Fraction(0))
    assert z == Prediction((1, 1))


def test_train_constant_class():
    data = LabeledSet(TWO_CONT)
    rng = random.Random(2)
    for _ in range(120):
        data.add(random_instance(TWO_CONT, rng), Prediction((0,)))
    net = train_mlp(data, TrainParams(seed=1))
    hits = 0
    for _ in range(1000):
        x = random_instance(TWO_CONT, rng)
        _, z = mlp_forward(net, x)
        hits += z == Prediction((0,))
    assert hits >= 950


def test_train_linearly_separable():
    data = LabeledSet(TWO_CONT)
    rng = random.Random(4)
    for _ in range(200):
        x = random_instance(TWO_CONT, rng)
        data.add(x, Prediction((int(x.values[0] + x.values[1] > 1),)))
    net = train_mlp(data, TrainParams(seed=3))
    hits = sum(1 for x, z in data.rows if mlp_forward(net, x)[1] == z)
    assert hits >= 0.95 * len(data)


def test_trained_parameters_are_quantized():
    data = LabeledSet(TWO_CONT)
    rng = random.Random(6)
    for _ in range(60):
        x = random_instance(TWO_CONT, rng)
        data.add(x, Prediction((int(x.values[0] > x.values[1]),)))
    net = train_mlp(data, TrainParams(seed=5, epochs=10))
    for w, b in zip(net.weights, net.biases):
        for row in w:
            for p in row:
                assert -10 <= p <= 10 and (p * 1000).denominator == 1
        for p in b:
            assert -10 <= p <= 10 and (p * 1000).denominator == 1


def test_training_deterministic():
    data = LabeledSet(TWO_CONT)
    rng = random.Random(8)
    for _ in range(80):
        x = random_instance(TWO_CONT, rng)
        data.add(x, Prediction((int(x.values[1] > Fraction(1, 2)),)))
    a = train_mlp(data, TrainParams(seed=9, epochs=15))
    b = train_mlp(data, TrainParams(seed=9, epochs=15))
    assert a == b


def test_multilabel_training_learns_threshold_mode():
    data = LabeledSet(MULTI)
    rng = random.Random(10)
    for _ in range(150):
        x = random_instance(MULTI, rng)
        dog = int(x.values[0] > Fraction(1, 2))
        data.add(x, Prediction((dog, 1)))
    net = train_mlp(data, TrainParams(seed=11))
    assert net.mode == "threshold"
    assert (net.th * 1000).denominator == 1
    hits = sum(1 for x, z in data.rows if mlp_forward(net, x)[1] == z)
    assert hits >= 0.9 * len(data)


def test_exact_forward_matches_float_within_1e_9(rng):
    for trial in range(10):
        net = random_quantized_mlp(5, (10, 10), 3, rng)
        ws = [np.array([[float(v) for v in row] for row in w]) for w in net.weights]
        bs = [np.array([float(v) for v in b]) for b in net.biases]
        x = Instance(tuple(Fraction(rng.randrange(0, 1001), 1000) for _ in range(5)))
        pre_exact, _ = mlp_forward(net, x)
        out = np.array([float(v) for v in x.values])
        for i, (w, b) in enumerate(zip(ws, bs)):
            z = w @ out + b
            out = np.maximum(z, 0.0) if i < len(ws) - 1 else z
        for exact, approx in zip(pre_exact, out):
            assert abs(float(exact) - approx) < 1e-9


def test_empty_data_rejected():
    with pytest.raises(ValueError, match="empty"):
        train_mlp(LabeledSet(TWO_CONT))


def test_mlp_json_contains_exact_strings():
    net = random_quantized_mlp(2, (3,), 2, random.Random(1))
    text = mlp_to_json(net)
    assert '"kind": "mlp"' in text
    assert '"mode": "argmax"' in text
