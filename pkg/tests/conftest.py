import random
from fractions import Fraction

import pytest

from veritest.schema import DatasetSchema, Instance, parse_schema
from veritest.surrogate import MlpSurrogate, quantize


def binary_schema(n_features: int, n_classes: int = 2, prefix: str = "f") -> DatasetSchema:
    feats = "".join(
        f'<feature name="{prefix}{i}" kind="categorical" categories="0,1"/>' for i in range(n_features)
    )
    classes = ",".join(str(c) for c in range(n_classes))
    return parse_schema(f'<schema>{feats}<label name="y" classes="{classes}"/></schema>')


def all_binary_instances(n_features: int) -> list[Instance]:
    out = []
    for bits in range(2**n_features):
        out.append(Instance(tuple(Fraction((bits >> i) & 1) for i in range(n_features))))
    return out


def random_quantized_mlp(
    n_in: int,
    hidden: tuple[int, ...],
    n_out: int,
    rng: random.Random,
    mode: str = "argmax",
    classes: tuple[int, ...] | None = None,
    th: Fraction = Fraction(0),
    scale: float = 1.0,
) -> MlpSurrogate:
    sizes = (n_in, *hidden, n_out)
    weights = tuple(
        tuple(
            tuple(quantize(Fraction(rng.uniform(-scale, scale))) for _ in range(sizes[i]))
            for _ in range(sizes[i + 1])
        )
        for i in range(len(sizes) - 1)
    )
    biases = tuple(
        tuple(quantize(Fraction(rng.uniform(-scale, scale))) for _ in range(sizes[i + 1]))
        for i in range(len(sizes) - 1)
    )
    if mode == "argmax" and classes is None:
        classes = tuple(range(n_out))
    return MlpSurrogate(sizes, weights, biases, mode, classes or (), quantize(th))


@pytest.fixture
def rng():
    return random.Random(20240817)
